// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>

#include "spotkit/nn/autograd.hpp"
#include "spotkit/rng.hpp"

namespace spotkit::nn {

/// Named learnable tensors, iterated in lexicographic name order.
class ParamStore {
 public:
  Var& add(const std::string& name, Tensor init);
  const Var& at(const std::string& name) const;
  Var& at(const std::string& name);
  bool contains(const std::string& name) const { return params_.contains(name); }

  void zero_grad();
  std::size_t count() const;  // total scalar parameters

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  std::size_t size() const { return params_.size(); }

 private:
  std::map<std::string, Var> params_;
};

/// N(0, stddev^2) initialized tensor.
Tensor gaussian(const Shape& shape, double stddev, Rng& rng);

/// Glorot-uniform initialized [fan_in, fan_out] weight.
Tensor glorot(std::int64_t fan_in, std::int64_t fan_out, Rng& rng);

}  // namespace spotkit::nn
