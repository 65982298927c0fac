// SPDX-License-Identifier: Apache-2.0
#include "spotkit/models/pooling.hpp"

#include <algorithm>
#include <cmath>

#include "spotkit/error.hpp"

namespace spotkit::models {

namespace {

void check_mask(const nn::Var& features, const Mask& mask) {
  if (features.value().rank() != 2 || static_cast<std::int64_t>(mask.size()) != features.value().rows()) {
    throw Error(Errc::ShapeMismatch, "features must be [T,D] with a T-long mask");
  }
}

nn::Tensor mask_column(const Mask& mask) {
  nn::Tensor m({static_cast<std::int64_t>(mask.size()), 1});
  for (std::size_t i = 0; i < mask.size(); ++i) m.data[i] = mask[i] ? 1.0 : 0.0;
  return m;
}

void check_vlad(const nn::Var& features, const VladParams& p) {
  const auto d = features.value().cols();
  const auto& c = p.centroids.value();
  const auto& w = p.assign_weight.value();
  const auto k = c.rank() == 2 ? c.rows() : -1;
  if (k < 1 || c.cols() != d || w.rank() != 2 || w.rows() != d || w.cols() != k || p.assign_bias.value().size() != k) {
    throw Error(Errc::ShapeMismatch, "NetVLAD parameters do not match feature dimension " + std::to_string(d));
  }
}

// Masked soft assignments [T,K].
nn::Var soft_assign(const nn::Var& features, const Mask& mask, const VladParams& p) {
  nn::Var logits = nn::add_row(nn::matmul(features, p.assign_weight), p.assign_bias);
  return nn::mul_col(nn::softmax_rows(logits), nn::constant(mask_column(mask)));
}

nn::Var normalize_blocks(const nn::Var& v) {
  const auto k = v.value().rows(), d = v.value().cols();
  nn::Var intra = nn::l2_normalize_rows(v, kVladEpsilon);
  return nn::l2_normalize_rows(nn::reshape(intra, {1, k * d}), kVladEpsilon);
}

}  // namespace

nn::Var pool_max(const nn::Var& features, const Mask& mask) {
  check_mask(features, mask);
  return nn::masked_max_rows(features, mask);
}

nn::Var pool_avg(const nn::Var& features, const Mask& mask) {
  check_mask(features, mask);
  const auto count = std::count(mask.begin(), mask.end(), true);
  if (count == 0) throw Error(Errc::AllMasked, "average pooling over a fully masked window");
  nn::Tensor weights({1, static_cast<std::int64_t>(mask.size())});
  for (std::size_t i = 0; i < mask.size(); ++i) weights.data[i] = mask[i] ? 1.0 / static_cast<double>(count) : 0.0;
  return nn::matmul(nn::constant(std::move(weights)), features);
}

nn::Var netvlad(const nn::Var& features, const Mask& mask, const VladParams& params) {
  check_mask(features, mask);
  check_vlad(features, params);
  nn::Var a = soft_assign(features, mask, params);
  // V_k = sum_t a_k(t) f_t - (sum_t a_k(t)) c_k
  nn::Var weighted = nn::matmul(nn::transpose(a), features);
  nn::Var mass = nn::sum_rows(a);
  nn::Var residual = nn::sub(weighted, nn::mul_col(params.centroids, mass));
  return normalize_blocks(residual);
}

nn::Var netrvlad(const nn::Var& features, const Mask& mask, const VladParams& params) {
  check_mask(features, mask);
  check_vlad(features, params);
  nn::Var a = soft_assign(features, mask, params);
  return normalize_blocks(nn::matmul(nn::transpose(a), features));
}

nn::Var temporally_aware_pool(const BasePool& before, const BasePool& after, const nn::Var& features,
                              const Mask& mask, std::int64_t split_index) {
  check_mask(features, mask);
  const auto t = features.value().rows();
  if (split_index <= 0 || split_index >= t) {
    throw Error(Errc::EmptyHalf, "split index " + std::to_string(split_index) + " outside (0, " + std::to_string(t) + ")");
  }
  const Mask first(mask.begin(), mask.begin() + split_index);
  const Mask second(mask.begin() + split_index, mask.end());
  auto any = [](const Mask& m) { return std::find(m.begin(), m.end(), true) != m.end(); };
  if (!any(first) || !any(second)) throw Error(Errc::EmptyHalf, "a pooling half has no unmasked rows");
  const nn::Var parts[] = {before(nn::slice_rows(features, 0, split_index), first),
                           after(nn::slice_rows(features, split_index, t - split_index), second)};
  return nn::concat_cols(parts);
}

VladParams init_vlad_params(nn::ParamStore& store, const std::string& prefix, std::int64_t clusters,
                            std::int64_t dim, Rng& rng, double alpha) {
  if (clusters < 1) throw Error(Errc::InvalidArgument, "cluster count must be >= 1");
  nn::Tensor centroids = nn::gaussian({clusters, dim}, 1.0 / std::sqrt(static_cast<double>(dim)), rng);
  nn::Tensor weight({dim, clusters});
  nn::Tensor bias({1, clusters});
  for (std::int64_t k = 0; k < clusters; ++k) {
    double sq = 0.0;
    for (std::int64_t j = 0; j < dim; ++j) {
      weight(j, k) = 2.0 * alpha * centroids(k, j);
      sq += centroids(k, j) * centroids(k, j);
    }
    bias.data[k] = -alpha * sq;
  }
  VladParams p;
  p.centroids = store.add(prefix + "centroids", std::move(centroids));
  p.assign_weight = store.add(prefix + "assign_weight", std::move(weight));
  p.assign_bias = store.add(prefix + "assign_bias", std::move(bias));
  return p;
}

VladParams vlad_params(const nn::ParamStore& store, const std::string& prefix) {
  return {store.at(prefix + "centroids"), store.at(prefix + "assign_weight"), store.at(prefix + "assign_bias")};
}

std::int64_t pooled_dim(const PoolingSpec& spec, std::int64_t feature_dim) {
  const bool clustered = spec.kind == PoolKind::netvlad || spec.kind == PoolKind::netrvlad;
  const std::int64_t base = clustered ? spec.clusters * feature_dim : feature_dim;
  return spec.temporally_aware ? 2 * base : base;
}

std::string pool_kind_name(PoolKind kind) {
  switch (kind) {
    case PoolKind::max: return "max";
    case PoolKind::avg: return "avg";
    case PoolKind::netvlad: return "netvlad";
    case PoolKind::netrvlad: return "netrvlad";
  }
  return "?";
}

PoolingNeck::PoolingNeck(PoolingSpec spec, std::int64_t feature_dim, nn::ParamStore& store, Rng& rng)
    : spec_(spec), feature_dim_(feature_dim), store_(&store) {
  const bool clustered = spec.kind == PoolKind::netvlad || spec.kind == PoolKind::netrvlad;
  if (!clustered) return;
  if (spec.temporally_aware) {
    init_vlad_params(store, "neck.before.", spec.clusters, feature_dim, rng);
    init_vlad_params(store, "neck.after.", spec.clusters, feature_dim, rng);
  } else {
    init_vlad_params(store, "neck.", spec.clusters, feature_dim, rng);
  }
}

BasePool PoolingNeck::make_pool(const std::string& prefix) const {
  switch (spec_.kind) {
    case PoolKind::max: return pool_max;
    case PoolKind::avg: return pool_avg;
    case PoolKind::netvlad: {
      VladParams p = vlad_params(*store_, prefix);
      return [p](const nn::Var& f, const Mask& m) { return netvlad(f, m, p); };
    }
    case PoolKind::netrvlad: {
      VladParams p = vlad_params(*store_, prefix);
      return [p](const nn::Var& f, const Mask& m) { return netrvlad(f, m, p); };
    }
  }
  throw Error(Errc::InvalidArgument, "unknown pooling kind");
}

nn::Var PoolingNeck::forward(const nn::Var& features, const Mask& mask) const {
  if (features.value().cols() != feature_dim_) {
    throw Error(Errc::ShapeMismatch, "neck expects feature dim " + std::to_string(feature_dim_));
  }
  if (!spec_.temporally_aware) return make_pool("neck.")(features, mask);
  const auto split = spec_.split_index >= 0 ? spec_.split_index : features.value().rows() / 2;
  return temporally_aware_pool(make_pool("neck.before."), make_pool("neck.after."), features, mask, split);
}

}  // namespace spotkit::models
