// SPDX-License-Identifier: Apache-2.0
//
// Pooling necks: temporal max/average pooling, NetVLAD and NetRVLAD
// cluster-based pooling, and the temporally-aware ("++") variants that pool
// the frames before and after an anchor row with independent parameters.

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "spotkit/nn/autograd.hpp"
#include "spotkit/nn/params.hpp"
#include "spotkit/rng.hpp"

namespace spotkit::models {

using Mask = std::vector<bool>;

enum class PoolKind { max, avg, netvlad, netrvlad };

struct PoolingSpec {
  PoolKind kind = PoolKind::netvlad;
  std::int64_t clusters = 64;
  bool temporally_aware = false;
  /// Anchor row for "++" pooling; negative selects the clip midpoint.
  std::int64_t split_index = -1;
};

inline constexpr double kVladEpsilon = 1e-12;

/// Cluster parameters: centroids [K,D], assignment weights [D,K], bias [1,K].
struct VladParams {
  nn::Var centroids;
  nn::Var assign_weight;
  nn::Var assign_bias;
};

nn::Var pool_max(const nn::Var& features, const Mask& mask);
nn::Var pool_avg(const nn::Var& features, const Mask& mask);

/// Soft-assigned residual aggregation, intra-normalized per cluster and then
/// globally; [T,D] -> [1, K*D].
nn::Var netvlad(const nn::Var& features, const Mask& mask, const VladParams& params);

/// As netvlad but aggregating raw features instead of residuals.
nn::Var netrvlad(const nn::Var& features, const Mask& mask, const VladParams& params);

using BasePool = std::function<nn::Var(const nn::Var&, const Mask&)>;

/// concat(before(F[0:s]), after(F[s:T])). Throws Error{EmptyHalf} when
/// s is not inside (0, T) or a half has no unmasked row.
nn::Var temporally_aware_pool(const BasePool& before, const BasePool& after, const nn::Var& features,
                              const Mask& mask, std::int64_t split_index);

/// Centroids ~ N(0, 1/D); w_k = 2*alpha*c_k, b_k = -alpha*|c_k|^2.
VladParams init_vlad_params(nn::ParamStore& store, const std::string& prefix, std::int64_t clusters,
                            std::int64_t dim, Rng& rng, double alpha = 1.0);

VladParams vlad_params(const nn::ParamStore& store, const std::string& prefix);

std::int64_t pooled_dim(const PoolingSpec& spec, std::int64_t feature_dim);

std::string pool_kind_name(PoolKind kind);

/// Registers its parameters in `store` on construction and pools a clip
/// according to `spec`.
class PoolingNeck {
 public:
  PoolingNeck(PoolingSpec spec, std::int64_t feature_dim, nn::ParamStore& store, Rng& rng);

  nn::Var forward(const nn::Var& features, const Mask& mask) const;
  std::int64_t output_dim() const { return pooled_dim(spec_, feature_dim_); }
  const PoolingSpec& spec() const { return spec_; }

 private:
  BasePool make_pool(const std::string& prefix) const;

  PoolingSpec spec_;
  std::int64_t feature_dim_;
  nn::ParamStore* store_;
};

}  // namespace spotkit::models
