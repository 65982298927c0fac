// SPDX-License-Identifier: Apache-2.0
//
// Small parameterized building blocks shared by the model families.

#pragma once

#include <string>

#include "spotkit/nn/autograd.hpp"
#include "spotkit/nn/params.hpp"
#include "spotkit/rng.hpp"

namespace spotkit::models {

/// y = x W + b with W [in,out] and b [1,out], registered as <prefix>weight / <prefix>bias.
struct Linear {
  nn::Var weight;
  nn::Var bias;

  static Linear create(nn::ParamStore& store, const std::string& prefix, std::int64_t in, std::int64_t out, Rng& rng);
  static Linear zeros(nn::ParamStore& store, const std::string& prefix, std::int64_t in, std::int64_t out);
  nn::Var forward(const nn::Var& x) const;
  std::int64_t in_dim() const { return weight.value().rows(); }
  std::int64_t out_dim() const { return weight.value().cols(); }
};

/// Same-length 1-D convolution over rows of a [T,C] sequence (odd kernel).
struct TemporalConv {
  Linear proj;
  std::int64_t kernel = 1;

  static TemporalConv create(nn::ParamStore& store, const std::string& prefix, std::int64_t kernel, std::int64_t in,
                             std::int64_t out, Rng& rng);
  nn::Var forward(const nn::Var& x) const;
};

/// softmax(x W + b) over C+1 outputs, x a [B, D'] batch of pooled features.
nn::Var classification_head(const nn::Var& pooled, const Linear& head);

}  // namespace spotkit::models
