// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <numeric>

#include "oracles.hpp"
#include "spotkit/error.hpp"
#include "spotkit/models/layers.hpp"
#include "spotkit/models/pooling.hpp"
#include "test_support.hpp"

using namespace spotkit;
using namespace spotkit::models;
using nn::Tensor;
using nn::Var;

namespace {

oracle::Matrix to_rows(const Tensor& t) {
  oracle::Matrix m(static_cast<std::size_t>(t.rows()), std::vector<double>(static_cast<std::size_t>(t.cols())));
  for (std::int64_t r = 0; r < t.rows(); ++r) {
    for (std::int64_t c = 0; c < t.cols(); ++c) m[r][c] = t(r, c);
  }
  return m;
}

std::vector<double> flat(const Var& v) { return v.value().data; }

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

struct VladFixture {
  nn::ParamStore store;
  VladParams params;
  VladFixture(std::int64_t k, std::int64_t d, std::uint64_t seed) {
    Rng rng(seed);
    params = init_vlad_params(store, "", k, d, rng);
    // Perturb so assignment weights are not tied to the centroids.
    Rng noise(seed + 1);
    for (double& w : params.assign_weight.mutable_value().data) w += noise.normal(0.0, 0.5);
    for (double& b : params.assign_bias.mutable_value().data) b += noise.normal(0.0, 0.5);
  }
  std::vector<double> reference(const Tensor& f, const Mask& mask, bool residual) const {
    const auto w = to_rows(params.assign_weight.value());
    return oracle::vlad(to_rows(f), mask, to_rows(params.centroids.value()), w, params.assign_bias.value().data,
                        residual);
  }
};

Tensor random_features(std::int64_t t, std::int64_t d, Rng& rng) { return nn::gaussian({t, d}, 1.0, rng); }

}  // namespace

TEST_CASE("pool_max: examples and loop oracle") {
  CHECK(flat(pool_max(nn::constant(Tensor::matrix({{1, 5}, {3, 2}})), {true, true})) == std::vector<double>{3, 5});
  CHECK(flat(pool_max(nn::constant(Tensor::matrix({{4, -1}})), {true})) == std::vector<double>{4, -1});
  Rng rng(1);
  const Tensor f = random_features(8, 4, rng);
  std::vector<double> expected(4, -1e300);
  for (std::int64_t r = 0; r < 8; ++r) {
    for (std::int64_t c = 0; c < 4; ++c) expected[c] = std::max(expected[c], f(r, c));
  }
  CHECK(flat(pool_max(nn::constant(f), Mask(8, true))) == expected);
}

TEST_CASE("pool_avg: examples and masked tail") {
  CHECK(flat(pool_avg(nn::constant(Tensor::matrix({{1, 5}, {3, 3}})), {true, true})) == std::vector<double>{2, 4});
  CHECK(flat(pool_avg(nn::constant(Tensor({5, 3}, 1.25)), Mask(5, true))) == std::vector<double>{1.25, 1.25, 1.25});
  Rng rng(2);
  const Tensor f = random_features(5, 3, rng);
  Tensor padded({8, 3}, 0.0);
  std::copy(f.data.begin(), f.data.end(), padded.data.begin());
  Mask mask(8, false);
  std::fill_n(mask.begin(), 5, true);
  CHECK(max_diff(flat(pool_avg(nn::constant(padded), mask)), flat(pool_avg(nn::constant(f), Mask(5, true)))) < 1e-12);
}

TEST_CASE("pooling: fully masked input is rejected") {
  const Var f = nn::constant(Tensor({3, 2}, 1.0));
  CHECK_THROWS_AS(pool_max(f, Mask(3, false)), Error);
  try {
    pool_avg(f, Mask(3, false));
  } catch (const Error& e) {
    CHECK(e.code() == Errc::AllMasked);
  }
}

TEST_CASE("netvlad: single cluster is the normalized residual sum") {
  VladFixture fx(1, 3, 5);
  Rng rng(6);
  const Tensor f = random_features(6, 3, rng);
  std::vector<double> sum(3, 0.0);
  for (std::int64_t t = 0; t < 6; ++t) {
    for (std::int64_t i = 0; i < 3; ++i) sum[i] += f(t, i) - fx.params.centroids.value()(0, i);
  }
  const double n = std::sqrt(sum[0] * sum[0] + sum[1] * sum[1] + sum[2] * sum[2]);
  for (double& x : sum) x /= n;
  CHECK(max_diff(flat(netvlad(nn::constant(f), Mask(6, true), fx.params)), sum) < 1e-12);
}

TEST_CASE("netvlad: zero residual block stays finite and zero") {
  VladFixture fx(2, 3, 7);
  auto& c = fx.params.centroids.mutable_value();
  auto& b = fx.params.assign_bias.mutable_value();
  std::fill(fx.params.assign_weight.mutable_value().data.begin(), fx.params.assign_weight.mutable_value().data.end(), 0.0);
  b.data = {1000.0, -1000.0};  // everything assigned to cluster 0
  Tensor f({4, 3});
  for (std::int64_t t = 0; t < 4; ++t) {
    for (std::int64_t i = 0; i < 3; ++i) f(t, i) = c(0, i);
  }
  const auto out = flat(netvlad(nn::constant(f), Mask(4, true), fx.params));
  for (double x : out) CHECK(x == 0.0);
  CHECK(nn::all_finite(Tensor({1, 6}, out)));
}

TEST_CASE("netvlad / netrvlad: loop oracle on random instances") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    VladFixture fx(2, 3, 100 + seed);
    Rng rng(seed);
    const Tensor f = random_features(6, 3, rng);
    Mask mask(6, true);
    if (seed % 3 == 0) mask[seed % 6] = false;
    REQUIRE(max_diff(flat(netvlad(nn::constant(f), mask, fx.params)), fx.reference(f, mask, true)) < 1e-6);
    REQUIRE(max_diff(flat(netrvlad(nn::constant(f), mask, fx.params)), fx.reference(f, mask, false)) < 1e-6);
  }
}

TEST_CASE("netrvlad: equals netvlad with zero centroids") {
  VladFixture fx(3, 4, 11);
  Rng rng(12);
  const Tensor f = random_features(7, 4, rng);
  const auto r = flat(netrvlad(nn::constant(f), Mask(7, true), fx.params));
  std::fill(fx.params.centroids.mutable_value().data.begin(), fx.params.centroids.mutable_value().data.end(), 0.0);
  CHECK(max_diff(r, flat(netvlad(nn::constant(f), Mask(7, true), fx.params))) < 1e-12);
}

TEST_CASE("netrvlad: single cluster is the normalized feature sum") {
  VladFixture fx(1, 2, 13);
  const Tensor f = Tensor::matrix({{1, 2}, {3, 4}});
  const double n = std::sqrt(4.0 * 4.0 + 6.0 * 6.0);
  CHECK(max_diff(flat(netrvlad(nn::constant(f), {true, true}, fx.params)), {4.0 / n, 6.0 / n}) < 1e-12);
}

TEST_CASE("netvlad: time permutation invariance") {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    VladFixture fx(4, 5, 200 + trial);
    const Tensor f = random_features(9, 5, rng);
    std::vector<std::int64_t> perm(9);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    Tensor g({9, 5});
    Mask mask(9, true), permuted(9);
    mask[2] = false;
    for (std::int64_t t = 0; t < 9; ++t) {
      for (std::int64_t i = 0; i < 5; ++i) g(t, i) = f(perm[t], i);
      permuted[t] = mask[perm[t]];
    }
    REQUIRE(max_diff(flat(netvlad(nn::constant(f), mask, fx.params)), flat(netvlad(nn::constant(g), permuted, fx.params))) < 1e-6);
    REQUIRE(max_diff(flat(netrvlad(nn::constant(f), mask, fx.params)), flat(netrvlad(nn::constant(g), permuted, fx.params))) < 1e-6);
  }
}

TEST_CASE("pooling: appended masked rows change nothing") {
  Rng rng(31);
  VladFixture fx(3, 4, 32);
  const Tensor f = random_features(6, 4, rng);
  Tensor padded({10, 4}, 0.0);
  std::copy(f.data.begin(), f.data.end(), padded.data.begin());
  Mask short_mask(6, true), long_mask(10, false);
  std::fill_n(long_mask.begin(), 6, true);
  const Var a = nn::constant(f), b = nn::constant(padded);
  CHECK(flat(pool_max(a, short_mask)) == flat(pool_max(b, long_mask)));
  CHECK(max_diff(flat(pool_avg(a, short_mask)), flat(pool_avg(b, long_mask))) < 1e-9);
  CHECK(max_diff(flat(netvlad(a, short_mask, fx.params)), flat(netvlad(b, long_mask, fx.params))) < 1e-9);
  CHECK(max_diff(flat(netrvlad(a, short_mask, fx.params)), flat(netrvlad(b, long_mask, fx.params))) < 1e-9);
}

TEST_CASE("temporally_aware_pool: max example and errors") {
  const Var f = nn::constant(Tensor::matrix({{1}, {9}, {2}, {3}}));
  CHECK(flat(temporally_aware_pool(pool_max, pool_max, f, Mask(4, true), 2)) == std::vector<double>{9, 3});
  auto code = [&](const Mask& m, std::int64_t s) {
    try {
      temporally_aware_pool(pool_max, pool_max, f, m, s);
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::InvalidArgument;
  };
  CHECK(code(Mask(4, true), 0) == Errc::EmptyHalf);
  CHECK(code(Mask(4, true), 4) == Errc::EmptyHalf);
  CHECK(code({false, false, true, true}, 2) == Errc::EmptyHalf);
}

TEST_CASE("temporally_aware_pool: equals the explicit two-half concatenation") {
  Rng rng(41);
  VladFixture before(3, 4, 42), after(3, 4, 43);
  const Tensor f = random_features(10, 4, rng);
  const BasePool pb = [&](const Var& x, const Mask& m) { return netvlad(x, m, before.params); };
  const BasePool pa = [&](const Var& x, const Mask& m) { return netvlad(x, m, after.params); };
  for (std::int64_t s = 1; s < 10; ++s) {
    auto joint = flat(temporally_aware_pool(pb, pa, nn::constant(f), Mask(10, true), s));
    auto first = flat(pb(nn::constant(f.slice_leading(0, s)), Mask(s, true)));
    const auto second = flat(pa(nn::constant(f.slice_leading(s, 10 - s)), Mask(10 - s, true)));
    first.insert(first.end(), second.begin(), second.end());
    REQUIRE(joint == first);
  }
}

TEST_CASE("netvlad++: 64 clusters over 512-d features give 65,536 outputs") {
  Rng rng(51);
  nn::ParamStore store;
  PoolingSpec spec;
  spec.kind = PoolKind::netvlad;
  spec.clusters = 64;
  spec.temporally_aware = true;
  PoolingNeck neck(spec, 512, store, rng);
  CHECK(neck.output_dim() == 65536);
  const Var out = neck.forward(nn::constant(random_features(6, 512, rng)), Mask(6, true));
  CHECK(out.value().shape == nn::Shape{1, 65536});
  CHECK(store.contains("neck.before.centroids"));
  CHECK(store.contains("neck.after.centroids"));
}

TEST_CASE("netvlad: shape mismatch") {
  VladFixture fx(2, 3, 61);
  CHECK_THROWS_AS(netvlad(nn::constant(Tensor({4, 5}, 1.0)), Mask(4, true), fx.params), Error);
}

TEST_CASE("init: assignment parameters follow the centroids") {
  Rng rng(71);
  nn::ParamStore store;
  const VladParams p = init_vlad_params(store, "x.", 5, 8, rng);
  for (std::int64_t k = 0; k < 5; ++k) {
    double sq = 0.0;
    for (std::int64_t j = 0; j < 8; ++j) {
      CHECK(p.assign_weight.value()(j, k) == 2.0 * p.centroids.value()(k, j));
      sq += p.centroids.value()(k, j) * p.centroids.value()(k, j);
    }
    CHECK(p.assign_bias.value().data[k] == Catch::Approx(-sq).epsilon(1e-12));
  }
}

TEST_CASE("classification_head: softmax outputs") {
  nn::ParamStore store;
  const Linear zero = Linear::zeros(store, "z.", 4, 3);
  const auto uniform = classification_head(nn::constant(Tensor::matrix({{1, 2, 3, 4}})), zero).value();
  for (double x : uniform.data) CHECK(x == Catch::Approx(1.0 / 3.0).epsilon(1e-12));

  Linear eye = Linear::zeros(store, "e.", 3, 3);
  for (int i = 0; i < 3; ++i) eye.weight.mutable_value()(i, i) = 1.0;
  const auto peaked = classification_head(nn::constant(Tensor::matrix({{10, -10, -10}})), eye).value();
  CHECK(peaked.data[0] == Catch::Approx(1.0).margin(1e-4));
  CHECK(peaked.data[1] == Catch::Approx(0.0).margin(1e-4));

  Rng rng(81);
  const Linear random = Linear::create(store, "r.", 6, 4, rng);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = classification_head(nn::constant(nn::gaussian({3, 6}, 3.0, rng)), random).value();
    for (std::int64_t r = 0; r < 3; ++r) {
      double s = 0.0;
      for (std::int64_t c = 0; c < 4; ++c) {
        REQUIRE(p(r, c) >= 0.0);
        s += p(r, c);
      }
      REQUIRE(std::abs(s - 1.0) < 1e-6);
    }
  }
}
