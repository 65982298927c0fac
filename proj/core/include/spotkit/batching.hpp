// SPDX-License-Identifier: Apache-2.0
//
// Clip datasets and the deterministic prefetching batch iterator.
//
// A ClipDataset resolves each video of one manifest split into a timeline
// (pre-extracted features or decoded frames), loading lazily and caching.
// A clip plan (which windows, in which order) is a pure function of the
// dataset, the pipeline config, the seed and the epoch; batches are then
// materialized, possibly ahead of time on worker threads, and always
// delivered in plan order.

#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "spotkit/clips.hpp"
#include "spotkit/dataset_format.hpp"
#include "spotkit/video.hpp"

namespace spotkit {

enum class PayloadKind { features, frames };

/// Which windows become training clips.
enum class Sampling {
  /// window_clips over every video.
  sliding,
  /// Windows centered on (and near) each event, plus sampled background windows.
  event_centered,
};

struct PipelineConfig {
  PayloadKind payload = PayloadKind::features;
  Sampling sampling = Sampling::sliding;
  std::int64_t clip_length = 20;
  std::int64_t stride = 20;
  std::size_t batch_size = 32;
  bool shuffle = true;
  /// Batches materialized ahead of consumption; 0 builds synchronously.
  std::size_t prefetch_depth = 2;
  TargetMode target_mode = TargetMode::clip_label;
  std::int64_t frame_radius = 1;
  /// event_centered: clips centered within this many rows of an event are positives,
  /// and their label window is [center - radius, center + radius].
  std::int64_t center_radius = 1;
  /// event_centered: background clips drawn per positive clip.
  double negatives_per_positive = 2.0;
  /// event_centered: half of the background clips are drawn within this many
  /// rows of an event (but outside center_radius).
  std::int64_t hard_negative_radius = 8;
  DecodeRequest decode;
  std::string decode_backend = "software";
};

struct Timeline {
  std::string video_id;
  nn::Tensor data;  // [T, D] features or [T, H, W, C] frames
  double rate_hz = 0.0;
  std::vector<LabeledEvent> events;

  std::int64_t length() const { return data.dim(0); }
};

class ClipDataset {
 public:
  ClipDataset(DatasetManifest manifest, std::filesystem::path root, PayloadKind payload, DecodeRequest decode = {},
              std::string decode_backend = "software");

  const DatasetManifest& manifest() const { return manifest_; }
  std::size_t num_videos() const { return manifest_.videos.size(); }
  std::size_t num_classes() const { return manifest_.classes.size(); }
  PayloadKind payload() const { return payload_; }

  /// Loads (once) and returns the timeline of video i. Thread-safe.
  /// Throws Error{DataError} carrying the video id on loader failure.
  const Timeline& timeline(std::size_t i) const;

 private:
  DatasetManifest manifest_;
  std::filesystem::path root_;
  PayloadKind payload_;
  DecodeRequest decode_;
  std::string backend_;
  mutable std::vector<std::unique_ptr<std::once_flag>> once_;
  mutable std::vector<std::optional<Timeline>> cache_;
};

/// One planned clip: window rows [origin, origin+length) of a video (rows
/// outside the timeline are zero padding) and the row range used for labels.
struct ClipRef {
  std::size_t video = 0;
  std::int64_t origin = 0;
  std::int64_t length = 0;
  std::int64_t label_start = 0;
  std::int64_t label_length = 0;

  friend bool operator==(const ClipRef&, const ClipRef&) = default;
};

struct Clip {
  std::string video_id;
  std::size_t video_index = 0;
  std::int64_t start_index = 0;   // timeline row of the first real payload row
  std::int64_t length = 0;
  std::int64_t leading_pad = 0;   // zero rows before start_index
  nn::Tensor payload;             // [length, ...]
  std::vector<bool> pad_mask;     // true = real data
  ClipTargets targets;
  /// Window origin (start_index - leading_pad), timeline rate and every event
  /// of the source video, for losses that look past the clip borders.
  std::int64_t origin = 0;
  double rate_hz = 0.0;
  std::vector<LabeledEvent> video_events;
};

struct ClipBatch {
  std::size_t index = 0;
  std::vector<Clip> clips;
};

std::vector<ClipRef> plan_clips(const ClipDataset& dataset, const PipelineConfig& config, std::uint64_t seed,
                                std::uint64_t epoch);

Clip materialize_clip(const ClipDataset& dataset, const ClipRef& ref, const PipelineConfig& config);

class BatchIterator {
 public:
  BatchIterator(std::shared_ptr<const ClipDataset> dataset, PipelineConfig config, std::vector<ClipRef> plan);

  /// Next batch in plan order, or nullopt when exhausted. Loader failures are
  /// rethrown as Error{DataError} naming the clip.
  std::optional<ClipBatch> next();

  std::size_t num_batches() const;
  const std::vector<ClipRef>& plan() const { return *plan_; }

 private:
  void top_up();

  std::shared_ptr<const ClipDataset> dataset_;
  std::shared_ptr<const PipelineConfig> config_;
  std::shared_ptr<const std::vector<ClipRef>> plan_;
  std::size_t next_to_launch_ = 0;
  std::size_t next_to_deliver_ = 0;
  std::deque<std::future<ClipBatch>> pending_;
};

/// Plan for (seed, epoch) wrapped in an iterator.
BatchIterator batch_iterator(std::shared_ptr<const ClipDataset> dataset, const PipelineConfig& config,
                             std::uint64_t seed, std::uint64_t epoch = 0);

}  // namespace spotkit
