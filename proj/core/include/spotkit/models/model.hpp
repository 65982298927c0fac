// SPDX-License-Identifier: Apache-2.0
//
// Model configuration, the common model interface used by the runners, the
// string-keyed registry, and dense timeline prediction.

#pragma once

#include <functional>
#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "spotkit/batching.hpp"
#include "spotkit/models/calf.hpp"
#include "spotkit/models/pooling.hpp"
#include "spotkit/models/pts.hpp"

namespace spotkit::models {

struct CalfOptions {
  std::int64_t hidden = 32;
  std::int64_t candidates = 5;
  ZoneParams zones;
  double loc_weight = 1.0;
  double segmentation_weight = 1.0;
  double spotting_weight = 1.0;
};

struct ModelConfig {
  std::string key = "pool:netvlad++";
  std::int64_t num_classes = 0;
  /// Feature dimension for feature models; frame channels for "pts".
  std::int64_t input_dim = 0;
  std::int64_t clip_length = 20;
  std::int64_t clusters = 64;
  CalfOptions calf;
  PtsOptions pts;
  std::uint64_t init_seed = 0;
  /// Free-form settings for externally registered models.
  nlohmann::json options = nlohmann::json::object();
};

nlohmann::ordered_json model_config_to_json(const ModelConfig& config);
/// Missing keys keep their defaults. Throws Error{ConfigError}.
ModelConfig model_config_from_json(const nlohmann::json& j);

enum class OutputMode {
  clip,        // one C+1 simplex per window, attributed to the window center
  frame,       // one C+1 simplex per window row
  candidates,  // M candidate spots per window
};

class SpottingModel {
 public:
  explicit SpottingModel(ModelConfig config) : config_(std::move(config)) {}
  virtual ~SpottingModel() = default;

  const ModelConfig& config() const { return config_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  virtual OutputMode output_mode() const = 0;
  virtual PayloadKind payload() const { return PayloadKind::features; }
  virtual TargetMode target_mode() const { return TargetMode::clip_label; }
  virtual Sampling default_sampling() const { return Sampling::sliding; }

  /// Scalar training loss over a batch. Clips a model cannot score (for
  /// example a temporally-aware window whose first half is all padding) are
  /// skipped; the result has no gradient when every clip was skipped.
  virtual nn::Var batch_loss(const ClipBatch& batch) const = 0;

  /// Scores one window (rows of `payload`, `mask` true for real rows):
  /// clip -> [1,C+1], frame -> [L,C+1], candidates -> [M, 2+C+1] holding
  /// (location, confidence, class simplex) per row.
  virtual nn::Tensor predict_window(const nn::Tensor& payload, const std::vector<bool>& mask) const = 0;

 protected:
  ModelConfig config_;
  nn::ParamStore params_;
};

using ModelFactory = std::function<std::unique_ptr<SpottingModel>(const ModelConfig&)>;

class ModelRegistry {
 public:
  /// Holds the "pool:*", "calf" and "pts" models.
  static ModelRegistry& global();

  void register_model(const std::string& key, ModelFactory factory);
  bool contains(const std::string& key) const;
  std::vector<std::string> keys() const;
  /// Throws Error{ConfigError} for an unknown key.
  std::unique_ptr<SpottingModel> create(const ModelConfig& config) const;

 private:
  std::map<std::string, ModelFactory> factories_;
};

std::unique_ptr<SpottingModel> create_model(const ModelConfig& config);

/// Parses "pool:<kind>[++]". Throws Error{ConfigError}.
PoolingSpec parse_pool_key(const std::string& key, std::int64_t clusters);

struct ScoreTimeline {
  double rate_hz = 0.0;
  std::vector<std::int64_t> timestamps_ms;
  /// [N, C+1] (background last) or [N, C].
  nn::Tensor scores;
  std::int64_t num_classes = 0;
};

/// Dense per-timestamp scores over a whole timeline ([T,D] features or
/// [T,H,W,C] frames at rate_hz).
///
/// clip: windows from centered_windows; each window's
/// scores become one row at its center. frame: windows from window_clips,
/// overlapping rows averaged. candidates: windows from window_clips; each
/// candidate adds confidence * class score at its row, keeping the maximum.
ScoreTimeline predict_video(const SpottingModel& model, const nn::Tensor& timeline, double rate_hz,
                            std::int64_t clip_length, std::int64_t eval_stride);

}  // namespace spotkit::models
