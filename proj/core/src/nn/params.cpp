// SPDX-License-Identifier: Apache-2.0
#include "spotkit/nn/params.hpp"

#include <cmath>

#include "spotkit/error.hpp"

namespace spotkit::nn {

Var& ParamStore::add(const std::string& name, Tensor init) {
  auto [it, inserted] = params_.emplace(name, Var(std::move(init), true));
  if (!inserted) throw Error(Errc::InvalidArgument, "duplicate parameter '" + name + "'");
  return it->second;
}

const Var& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error(Errc::InvalidArgument, "unknown parameter '" + name + "'");
  return it->second;
}

Var& ParamStore::at(const std::string& name) {
  return const_cast<Var&>(static_cast<const ParamStore&>(*this).at(name));
}

void ParamStore::zero_grad() {
  for (auto& [_, p] : params_) p.zero_grad();
}

std::size_t ParamStore::count() const {
  std::size_t n = 0;
  for (const auto& [_, p] : params_) n += p.value().data.size();
  return n;
}

Tensor gaussian(const Shape& shape, double stddev, Rng& rng) {
  Tensor t(shape);
  for (double& v : t.data) v = stddev * rng.normal();
  return t;
}

Tensor glorot(std::int64_t fan_in, std::int64_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t({fan_in, fan_out});
  for (double& v : t.data) v = rng.uniform(-limit, limit);
  return t;
}

}  // namespace spotkit::nn
