// SPDX-License-Identifier: Apache-2.0
//
// Video decoding behind a string-keyed backend registry.
//
// The built-in "software" backend reads raw frame tensors (`.osvid`: T*H*W*C
// uint8 values, frame-major, channels last) described by a JSON sidecar
// `<stem>.meta.json` with keys frames, height, width, channels, fps, codec.
// Other containers are served by registering additional backends.

#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>

#include "spotkit/dataset_format.hpp"
#include "spotkit/nn/tensor.hpp"

namespace spotkit {

inline constexpr std::string_view kRawVideoCodec = "raw-u8";

struct DecodedFrames {
  std::string video_id;
  nn::Tensor frames;  // [T, H, W, C] in [0, 1]
  double frame_rate_hz = 0.0;

  std::int64_t length() const { return frames.dim(0); }
};

struct DecodeRequest {
  double target_fps = 2.0;
  /// 0 keeps the source height.
  std::int64_t target_height = 0;
};

struct RawVideoInfo {
  std::int64_t frames = 0;
  std::int64_t height = 0;
  std::int64_t width = 0;
  std::int64_t channels = 3;
  double fps = 0.0;
  std::string codec{kRawVideoCodec};
};

class DecodeBackend {
 public:
  virtual ~DecodeBackend() = default;
  /// Returns frames at the source rate and resolution, scaled to [0, 1].
  virtual DecodedFrames read_source(const std::filesystem::path& file, const std::string& video_id) const = 0;
};

class DecoderRegistry {
 public:
  /// Process-wide registry; "software" is pre-registered.
  static DecoderRegistry& global();

  void register_backend(const std::string& name, std::shared_ptr<const DecodeBackend> backend);
  /// Throws Error{DecoderUnavailable}.
  std::shared_ptr<const DecodeBackend> get(const std::string& name) const;
  bool contains(const std::string& name) const;

 private:
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<const DecodeBackend>> backends_;
};

/// Source frame index selected for output frame k.
std::int64_t resample_index(std::int64_t k, double source_fps, double target_fps, std::int64_t source_frames);

/// Output frame count for a source of `source_frames` at `source_fps`.
std::int64_t resampled_count(std::int64_t source_frames, double source_fps, double target_fps);

/// Nearest-frame temporal resampling followed by bilinear resize.
DecodedFrames resample(const DecodedFrames& source, const DecodeRequest& request);

/// Throws Error{DecoderUnavailable | DecodeFailure | UnsupportedCodec | FileNotFound}.
DecodedFrames decode_video(const VideoEntry& entry, const std::filesystem::path& root, const DecodeRequest& request,
                           const std::string& backend = "software");

std::filesystem::path video_sidecar_path(const std::filesystem::path& video_file);
void write_raw_video(const std::filesystem::path& file, const RawVideoInfo& info, std::span<const std::uint8_t> data);
RawVideoInfo read_raw_video_info(const std::filesystem::path& file);

}  // namespace spotkit
