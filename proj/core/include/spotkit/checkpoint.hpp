// SPDX-License-Identifier: Apache-2.0
//
// Binary checkpoint container: an 8-byte magic, a u32 format version, a u64
// header length, a JSON header (model config, training state, tensor table)
// and the tensor payloads as little-endian f64. No wall-clock data is stored,
// so saving the same state twice yields identical bytes.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "spotkit/models/model.hpp"
#include "spotkit/nn/optim.hpp"

namespace spotkit {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct BestRecord {
  std::string metric = "val_loose_map";  // or "neg_train_loss"
  double value = 0.0;
  /// Breaks ties on `value` (validation tight average-mAP).
  double tiebreak = 0.0;
  std::int64_t epoch = 0;  // 0 = none yet
  friend bool operator==(const BestRecord&, const BestRecord&) = default;
};

struct Checkpoint {
  std::uint32_t format_version = kCheckpointVersion;
  models::ModelConfig model;
  std::map<std::string, nn::Tensor> params;
  nn::OptimizerConfig optimizer;
  std::int64_t optimizer_steps = 0;
  std::map<std::string, nn::Tensor> optimizer_state;
  std::int64_t epoch = 0;  // completed epochs
  BestRecord best;
  std::int64_t stale_epochs = 0;  // epochs since the last improvement
};

std::string checkpoint_bytes(const Checkpoint& checkpoint);
Checkpoint parse_checkpoint(const std::string& bytes);

/// Throws Error{IoError}.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
/// Throws Error{FileNotFound | CheckpointMismatch} (the latter for corrupt or
/// unknown-version files).
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Snapshot of a model and optimizer.
Checkpoint make_checkpoint(const models::SpottingModel& model, const nn::Optimizer& optimizer);

/// Copies checkpoint parameters into `model`. Throws Error{CheckpointMismatch}
/// when the model configs or the parameter sets differ.
void restore_params(models::SpottingModel& model, const Checkpoint& checkpoint);

nlohmann::ordered_json optimizer_config_to_json(const nn::OptimizerConfig& config);
nn::OptimizerConfig optimizer_config_from_json(const nlohmann::json& j);

}  // namespace spotkit
