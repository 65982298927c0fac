// SPDX-License-Identifier: Apache-2.0
#include "spotkit/batching.hpp"

#include <algorithm>
#include <set>

#include "spotkit/error.hpp"
#include "spotkit/features.hpp"
#include "spotkit/rng.hpp"

namespace spotkit {

ClipDataset::ClipDataset(DatasetManifest manifest, std::filesystem::path root, PayloadKind payload,
                         DecodeRequest decode, std::string decode_backend)
    : manifest_(std::move(manifest)),
      root_(std::move(root)),
      payload_(payload),
      decode_(decode),
      backend_(std::move(decode_backend)),
      cache_(manifest_.videos.size()) {
  once_.reserve(manifest_.videos.size());
  for (std::size_t i = 0; i < manifest_.videos.size(); ++i) once_.push_back(std::make_unique<std::once_flag>());
}

const Timeline& ClipDataset::timeline(std::size_t i) const {
  const VideoEntry& entry = manifest_.videos.at(i);
  std::call_once(*once_[i], [&] {
    Timeline t;
    t.video_id = entry.id();
    try {
      if (payload_ == PayloadKind::features) {
        FeatureSequence seq = load_feature_sequence(entry, root_);
        t.data = std::move(seq.data);
        t.rate_hz = seq.feature_rate_hz;
      } else {
        DecodedFrames frames = decode_video(entry, root_, decode_, backend_);
        t.data = std::move(frames.frames);
        t.rate_hz = frames.frame_rate_hz;
      }
      t.events = resolve_events(entry, manifest_);
    } catch (const Error& e) {
      throw Error(Errc::DataError, "video '" + entry.id() + "': " + e.what());
    }
    cache_[i] = std::move(t);
  });
  return *cache_[i];
}

namespace {

void plan_event_centered(const ClipDataset& dataset, const PipelineConfig& config, std::uint64_t seed,
                         std::uint64_t epoch, std::vector<ClipRef>& plan) {
  const auto r = config.center_radius;
  const auto half = config.clip_length / 2;
  for (std::size_t v = 0; v < dataset.num_videos(); ++v) {
    const Timeline& t = dataset.timeline(v);
    const auto length = t.length();
    Rng rng(derive_seed(derive_seed(seed, epoch), v));

    std::set<std::int64_t> positive_centers;
    for (const auto& e : t.events) {
      const auto row = nearest_row(e.position_ms, t.rate_hz);
      for (std::int64_t o = -r; o <= r; ++o) {
        if (row + o >= 0 && row + o < length) positive_centers.insert(row + o);
      }
    }
    auto add = [&](std::int64_t center) {
      plan.push_back({v, center - half, config.clip_length, center - r, 2 * r + 1});
    };
    for (auto c : positive_centers) add(c);

    // Background centers: no event row within r.
    std::vector<std::int64_t> hard, easy;
    for (std::int64_t c = 0; c < length; ++c) {
      std::int64_t nearest = std::numeric_limits<std::int64_t>::max();
      for (const auto& e : t.events) nearest = std::min(nearest, std::abs(c - nearest_row(e.position_ms, t.rate_hz)));
      if (nearest <= r) continue;
      (nearest <= config.hard_negative_radius ? hard : easy).push_back(c);
    }
    const auto wanted = static_cast<std::size_t>(
        std::llround(config.negatives_per_positive * static_cast<double>(std::max<std::size_t>(positive_centers.size(), 1))));
    rng.shuffle(hard);
    rng.shuffle(easy);
    const std::size_t from_hard = std::min(hard.size(), wanted / 2);
    const std::size_t from_easy = std::min(easy.size(), wanted - from_hard);
    for (std::size_t i = 0; i < from_hard; ++i) add(hard[i]);
    for (std::size_t i = 0; i < from_easy; ++i) add(easy[i]);
  }
}

}  // namespace

std::vector<ClipRef> plan_clips(const ClipDataset& dataset, const PipelineConfig& config, std::uint64_t seed,
                                std::uint64_t epoch) {
  if (config.clip_length < 1 || config.stride < 1 || config.batch_size < 1) {
    throw Error(Errc::ConfigError, "clip_length, stride and batch_size must be >= 1");
  }
  std::vector<ClipRef> plan;
  if (config.sampling == Sampling::sliding) {
    for (std::size_t v = 0; v < dataset.num_videos(); ++v) {
      const auto length = dataset.timeline(v).length();
      for (const Window& w : window_clips(length, config.clip_length, config.stride)) {
        plan.push_back({v, w.start, config.clip_length, w.start, config.clip_length});
      }
    }
  } else {
    plan_event_centered(dataset, config, seed, epoch, plan);
  }
  if (config.shuffle) {
    Rng rng(derive_seed(seed ^ 0x5f0c1a7e5ull, epoch));
    rng.shuffle(plan);
  }
  return plan;
}

Clip materialize_clip(const ClipDataset& dataset, const ClipRef& ref, const PipelineConfig& config) {
  const Timeline& t = dataset.timeline(ref.video);
  const auto length = t.length();
  const auto row_size = nn::numel(t.data.shape) / length;

  Clip clip;
  clip.video_id = t.video_id;
  clip.video_index = ref.video;
  clip.length = ref.length;
  const auto first = std::max<std::int64_t>(ref.origin, 0);
  const auto last = std::min(ref.origin + ref.length, length);  // exclusive
  clip.start_index = first;
  clip.leading_pad = first - ref.origin;
  clip.origin = ref.origin;
  clip.rate_hz = t.rate_hz;
  clip.video_events = t.events;

  nn::Shape shape = t.data.shape;
  shape[0] = ref.length;
  clip.payload = nn::Tensor(shape, 0.0);
  clip.pad_mask.assign(static_cast<std::size_t>(ref.length), false);
  if (last > first) {
    std::copy(t.data.data.begin() + first * row_size, t.data.data.begin() + last * row_size,
              clip.payload.data.begin() + clip.leading_pad * row_size);
    std::fill(clip.pad_mask.begin() + clip.leading_pad, clip.pad_mask.begin() + clip.leading_pad + (last - first),
              true);
  }
  const std::int64_t radius = config.target_mode == TargetMode::frame_label ? config.frame_radius : 0;
  clip.targets = assign_targets(ref.label_start, ref.label_length, t.events, t.rate_hz, config.target_mode, radius,
                                dataset.num_classes());
  return clip;
}

BatchIterator::BatchIterator(std::shared_ptr<const ClipDataset> dataset, PipelineConfig config,
                             std::vector<ClipRef> plan)
    : dataset_(std::move(dataset)),
      config_(std::make_shared<const PipelineConfig>(std::move(config))),
      plan_(std::make_shared<const std::vector<ClipRef>>(std::move(plan))) {}

std::size_t BatchIterator::num_batches() const {
  return (plan_->size() + config_->batch_size - 1) / config_->batch_size;
}

namespace {

ClipBatch build_batch(const ClipDataset& dataset, const PipelineConfig& config, const std::vector<ClipRef>& plan,
                      std::size_t batch_index) {
  ClipBatch batch;
  batch.index = batch_index;
  const std::size_t begin = batch_index * config.batch_size;
  const std::size_t end = std::min(plan.size(), begin + config.batch_size);
  for (std::size_t i = begin; i < end; ++i) {
    const ClipRef& ref = plan[i];
    try {
      batch.clips.push_back(materialize_clip(dataset, ref, config));
    } catch (const Error& e) {
      throw Error(Errc::DataError, "clip " + std::to_string(i) + " (video #" + std::to_string(ref.video) +
                                       ", origin " + std::to_string(ref.origin) + "): " + e.what());
    }
  }
  return batch;
}

}  // namespace

void BatchIterator::top_up() {
  while (next_to_launch_ < num_batches() && pending_.size() < std::max<std::size_t>(config_->prefetch_depth, 1)) {
    const std::size_t index = next_to_launch_++;
    if (config_->prefetch_depth == 0) {
      std::promise<ClipBatch> ready;
      try {
        ready.set_value(build_batch(*dataset_, *config_, *plan_, index));
      } catch (...) {
        ready.set_exception(std::current_exception());
      }
      pending_.push_back(ready.get_future());
    } else {
      pending_.push_back(std::async(std::launch::async, [dataset = dataset_, config = config_, plan = plan_, index] {
        return build_batch(*dataset, *config, *plan, index);
      }));
    }
  }
}

std::optional<ClipBatch> BatchIterator::next() {
  top_up();
  if (pending_.empty()) return std::nullopt;
  auto future = std::move(pending_.front());
  pending_.pop_front();
  ++next_to_deliver_;
  ClipBatch batch = future.get();
  top_up();
  return batch;
}

BatchIterator batch_iterator(std::shared_ptr<const ClipDataset> dataset, const PipelineConfig& config,
                             std::uint64_t seed, std::uint64_t epoch) {
  auto plan = plan_clips(*dataset, config, seed, epoch);
  return BatchIterator(std::move(dataset), config, std::move(plan));
}

}  // namespace spotkit
