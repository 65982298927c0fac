// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "spotkit/nn/params.hpp"

namespace spotkit::nn {

enum class OptimizerKind { sgd, adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double lr = 1e-3;
  double momentum = 0.0;  // sgd only
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Global gradient-norm clip; 0 disables.
  double clip_norm = 0.0;
};

/// Plain SGD (optionally with momentum) or Adam. State is keyed by parameter
/// name so it can be checkpointed and restored.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config) : config_(config) {}

  void step(ParamStore& params);

  const OptimizerConfig& config() const { return config_; }
  std::int64_t steps() const { return steps_; }

  /// Named state tensors ("m/<param>", "v/<param>").
  std::map<std::string, Tensor> state() const;
  void restore(std::int64_t steps, std::map<std::string, Tensor> state);

 private:
  OptimizerConfig config_;
  std::int64_t steps_ = 0;
  std::map<std::string, Tensor> first_;
  std::map<std::string, Tensor> second_;
};

}  // namespace spotkit::nn
