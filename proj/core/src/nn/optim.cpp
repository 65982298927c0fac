// SPDX-License-Identifier: Apache-2.0
#include "spotkit/nn/optim.hpp"

#include <cmath>

#include "spotkit/error.hpp"

namespace spotkit::nn {

void Optimizer::step(ParamStore& params) {
  ++steps_;
  double clip = 1.0;
  if (config_.clip_norm > 0.0) {
    double ss = 0.0;
    for (const auto& [_, p] : params) {
      for (double g : p.node()->grad.data) ss += g * g;
    }
    const double norm = std::sqrt(ss);
    if (norm > config_.clip_norm) clip = config_.clip_norm / norm;
  }

  const double bias1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
  const double bias2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
  for (auto& [name, p] : params) {
    const Tensor& grad = p.node()->grad;
    if (grad.shape != p.value().shape) continue;  // no gradient reached this parameter
    Tensor& value = p.mutable_value();
    Tensor& m = first_[name];
    if (m.shape != value.shape) m = Tensor(value.shape, 0.0);
    if (config_.kind == OptimizerKind::sgd) {
      for (std::size_t i = 0; i < value.data.size(); ++i) {
        const double g = clip * grad.data[i];
        m.data[i] = config_.momentum * m.data[i] + g;
        value.data[i] -= config_.lr * m.data[i];
      }
      continue;
    }
    Tensor& v = second_[name];
    if (v.shape != value.shape) v = Tensor(value.shape, 0.0);
    for (std::size_t i = 0; i < value.data.size(); ++i) {
      const double g = clip * grad.data[i];
      m.data[i] = config_.beta1 * m.data[i] + (1.0 - config_.beta1) * g;
      v.data[i] = config_.beta2 * v.data[i] + (1.0 - config_.beta2) * g * g;
      const double mhat = m.data[i] / bias1;
      const double vhat = v.data[i] / bias2;
      value.data[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

std::map<std::string, Tensor> Optimizer::state() const {
  std::map<std::string, Tensor> out;
  for (const auto& [name, t] : first_) out["m/" + name] = t;
  for (const auto& [name, t] : second_) out["v/" + name] = t;
  return out;
}

void Optimizer::restore(std::int64_t steps, std::map<std::string, Tensor> state) {
  steps_ = steps;
  first_.clear();
  second_.clear();
  for (auto& [key, t] : state) {
    if (key.starts_with("m/")) first_[key.substr(2)] = std::move(t);
    else if (key.starts_with("v/")) second_[key.substr(2)] = std::move(t);
    else throw Error(Errc::CheckpointMismatch, "unknown optimizer state entry '" + key + "'");
  }
}

}  // namespace spotkit::nn
