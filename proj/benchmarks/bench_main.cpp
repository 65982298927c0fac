// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "spotkit/eval.hpp"
#include "spotkit/models/pooling.hpp"
#include "spotkit/nn/autograd.hpp"
#include "spotkit/rng.hpp"

using namespace spotkit;

namespace {

void BM_NetVladForward(benchmark::State& state) {
  const auto clusters = state.range(0), dim = state.range(1);
  Rng rng(1);
  nn::ParamStore store;
  const models::VladParams p = models::init_vlad_params(store, "p.", clusters, dim, rng);
  const nn::Var f = nn::constant(nn::gaussian({20, dim}, 1.0, rng));
  const models::Mask mask(20, true);
  nn::NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(models::netvlad(f, mask, p).value().data.data());
}
BENCHMARK(BM_NetVladForward)->Args({8, 32})->Args({64, 512});

void BM_NetVladBackward(benchmark::State& state) {
  Rng rng(2);
  nn::ParamStore store;
  const models::VladParams p = models::init_vlad_params(store, "p.", 8, 32, rng);
  const nn::Var f = nn::constant(nn::gaussian({16, 32}, 1.0, rng));
  const models::Mask mask(16, true);
  for (auto _ : state) {
    store.zero_grad();
    nn::backward(nn::sum(models::netvlad(f, mask, p)));
  }
}
BENCHMARK(BM_NetVladBackward);

DatasetManifest bench_manifest(Rng& rng, bool predictions) {
  DatasetManifest m;
  m.dataset_name = "bench";
  m.classes = {"a", "b", "c", "d", "e"};
  for (int v = 0; v < 10; ++v) {
    VideoEntry e;
    e.path = "v" + std::to_string(v);
    e.duration_ms = 2'700'000;
    e.split = Split::test;
    for (int k = 0; k < (predictions ? 200 : 40); ++k) {
      Annotation a;
      a.label = m.classes[rng.below(5)];
      a.position_ms = static_cast<std::int64_t>(rng.below(2'700'000));
      if (predictions) a.confidence = rng.uniform();
      e.annotations.push_back(a);
    }
    m.videos.push_back(e);
  }
  return m;
}

void BM_Evaluate(benchmark::State& state) {
  Rng rng(3);
  const DatasetManifest truth = bench_manifest(rng, false);
  const DatasetManifest pred = bench_manifest(rng, true);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(pred, truth).average_map_loose);
}
BENCHMARK(BM_Evaluate)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
