// SPDX-License-Identifier: Apache-2.0
//
// Pre-extracted per-frame embeddings.
//
// On disk a feature file (`.osfeat`) is an 8-byte header (u32 rows, u32 dims,
// little-endian) followed by rows*dims little-endian float32 values. An
// optional JSON sidecar `<stem>.meta.json` next to it carries
// `feature_rate_hz`; 2 Hz is assumed when it is absent.

#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "spotkit/dataset_format.hpp"
#include "spotkit/nn/tensor.hpp"

namespace spotkit {

inline constexpr double kDefaultFeatureRateHz = 2.0;

struct FeatureSequence {
  std::string video_id;
  nn::Tensor data;  // [T, D]
  double feature_rate_hz = kDefaultFeatureRateHz;

  std::int64_t length() const { return data.rows(); }
  std::int64_t dim() const { return data.cols(); }
  double timestamp_s(std::int64_t row) const { return static_cast<double>(row) / feature_rate_hz; }
};

std::filesystem::path feature_sidecar_path(const std::filesystem::path& feature_file);

/// Throws Error{FileNotFound | CorruptFeatureFile | NonFiniteValues}.
FeatureSequence read_feature_file(const std::filesystem::path& file, std::string video_id = {});

/// Writes `data` as float32; a sidecar is written when `rate_hz` is given.
void write_feature_file(const std::filesystem::path& file, const nn::Tensor& data,
                        std::optional<double> rate_hz = std::nullopt);

/// Resolves entry.features_path against root and reads it.
FeatureSequence load_feature_sequence(const VideoEntry& entry, const std::filesystem::path& root);

}  // namespace spotkit
