// SPDX-License-Identifier: Apache-2.0
//
// Deterministic synthetic spotting datasets: Gaussian-noise feature streams
// with class signatures injected as triangular bumps around each event, and
// optional 32x32 renders of a drifting square that flashes a class color.

#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "spotkit/dataset_format.hpp"
#include "spotkit/nn/tensor.hpp"

namespace spotkit {

struct SynthSpec {
  std::size_t num_classes = 3;
  std::size_t train_videos = 200;
  std::size_t valid_videos = 0;
  std::size_t test_videos = 50;
  double duration_s = 120.0;
  double feature_rate_hz = 2.0;
  std::int64_t feature_dim = 32;
  double events_per_video = 6.0;  // Poisson mean
  double signature_strength = 1.0;
  double noise_sigma = 0.5;
  double min_event_gap_s = 8.0;
  /// Events stay at least this far from both ends of a video.
  double edge_margin_s = 3.0;
  double bump_half_width_s = 1.5;
  std::uint64_t seed = 0;
  bool render_video = false;
  double render_fps = 4.0;
  std::int64_t frame_size = 32;
  double flash_s = 0.5;
  std::string dataset_name = "synthetic";

  /// Throws Error{InvalidSpec}.
  void validate() const;
};

nlohmann::ordered_json synth_spec_to_json(const SynthSpec& spec);
/// Missing keys keep their defaults. Throws Error{InvalidSpec}.
SynthSpec synth_spec_from_json(const nlohmann::json& j);

/// Unit-free class signatures [C, D], each of Euclidean norm sqrt(D).
nn::Tensor class_signatures(const SynthSpec& spec);

/// Writes features/<split>/<name>.osfeat (and videos/<split>/<name>.osvid when
/// rendering) plus manifest.json under out_root; returns the manifest.
DatasetManifest generate(const SynthSpec& spec, const std::filesystem::path& out_root);

/// Manifest file written by generate().
inline constexpr const char* kSynthManifestName = "manifest.json";

}  // namespace spotkit
