// SPDX-License-Identifier: Apache-2.0
#include "spotkit/models/layers.hpp"

#include "spotkit/error.hpp"

namespace spotkit::models {

Linear Linear::create(nn::ParamStore& store, const std::string& prefix, std::int64_t in, std::int64_t out, Rng& rng) {
  return {store.add(prefix + "weight", nn::glorot(in, out, rng)), store.add(prefix + "bias", nn::Tensor({1, out}, 0.0))};
}

Linear Linear::zeros(nn::ParamStore& store, const std::string& prefix, std::int64_t in, std::int64_t out) {
  return {store.add(prefix + "weight", nn::Tensor({in, out}, 0.0)), store.add(prefix + "bias", nn::Tensor({1, out}, 0.0))};
}

nn::Var Linear::forward(const nn::Var& x) const {
  if (x.value().rank() != 2 || x.value().cols() != in_dim()) {
    throw Error(Errc::ShapeMismatch, "linear layer expects " + std::to_string(in_dim()) + " inputs, got " +
                                         nn::shape_string(x.shape()));
  }
  return nn::add_row(nn::matmul(x, weight), bias);
}

TemporalConv TemporalConv::create(nn::ParamStore& store, const std::string& prefix, std::int64_t kernel,
                                  std::int64_t in, std::int64_t out, Rng& rng) {
  if (kernel < 1 || kernel % 2 == 0) throw Error(Errc::InvalidArgument, "temporal kernel must be odd");
  return {Linear::create(store, prefix, kernel * in, out, rng), kernel};
}

nn::Var TemporalConv::forward(const nn::Var& x) const {
  return proj.forward(nn::unfold_time(x, kernel, kernel / 2));
}

nn::Var classification_head(const nn::Var& pooled, const Linear& head) {
  return nn::softmax_rows(head.forward(pooled));
}

}  // namespace spotkit::models
