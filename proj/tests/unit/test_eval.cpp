// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include "eval_scenarios.hpp"
#include "oracles.hpp"
#include "spotkit/error.hpp"
#include "spotkit/eval.hpp"
#include "test_support.hpp"

using namespace spotkit;

namespace {

std::vector<Detection> dets(std::initializer_list<std::pair<double, double>> seconds_conf) {
  std::vector<Detection> out;
  for (auto [s, c] : seconds_conf) out.push_back({"v", static_cast<std::int64_t>(s * 1000), c});
  return out;
}

std::vector<GroundTruth> gts(std::initializer_list<double> seconds) {
  std::vector<GroundTruth> out;
  for (double s : seconds) out.push_back({"v", static_cast<std::int64_t>(s * 1000)});
  return out;
}

models::ScoreTimeline timeline(std::vector<std::int64_t> ms, std::vector<double> scores) {
  models::ScoreTimeline t;
  t.rate_hz = 2.0;
  t.num_classes = 1;
  t.timestamps_ms = std::move(ms);
  const auto rows = static_cast<std::int64_t>(scores.size());
  t.scores = nn::Tensor({rows, 1}, std::move(scores));
  return t;
}

DatasetManifest gt_manifest() {
  DatasetManifest m;
  m.dataset_name = "gt";
  m.classes = {"Goal", "Card"};
  for (int v = 0; v < 2; ++v) {
    VideoEntry e;
    e.path = "v" + std::to_string(v);
    e.duration_ms = 600000;
    e.split = Split::test;
    e.annotations.push_back({"Goal", 60000 + v * 1000, std::nullopt, {}});
    e.annotations.push_back({"Card", 200000, std::nullopt, {}});
    e.annotations.push_back({"Goal", 400000, std::nullopt, {}});
    m.videos.push_back(e);
  }
  return m;
}

DatasetManifest shifted(const DatasetManifest& m, std::int64_t offset_ms, std::optional<double> conf) {
  DatasetManifest out = m;
  for (auto& v : out.videos) {
    for (auto& a : v.annotations) {
      a.position_ms += offset_ms;
      a.confidence = conf;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("extract_spots: NMS keeps the stronger of two close points") {
  const auto spots = extract_spots(timeline({1000, 1500}, {0.9, 0.8}), {"Goal"}, "v", 0.5, 1000);
  REQUIRE(spots.size() == 1);
  CHECK(spots[0].position_ms == 1000);
  CHECK(spots[0].confidence == 0.9);
  CHECK(spots[0].label == "Goal");
}

TEST_CASE("extract_spots: zero window, threshold and empty timeline") {
  const auto tl = timeline({0, 500, 1000, 1500}, {0.6, 0.4, 0.7, 0.7});
  CHECK(extract_spots(tl, {"Goal"}, "v", 0.5, 0).size() == 3);
  CHECK(extract_spots(tl, {"Goal"}, "v", 1.01, 0).empty());
  CHECK(extract_spots(timeline({}, {}), {"Goal"}, "v", 0.0, 1000).empty());
  // equal scores: the earlier point wins and suppresses the later one
  const auto tie = extract_spots(tl, {"Goal"}, "v", 0.65, 600);
  REQUIRE(tie.size() == 1);
  CHECK(tie[0].position_ms == 1000);
}

TEST_CASE("average_precision: examples") {
  CHECK(*average_precision(dets({{10, .5}, {20, .6}, {30, .7}}), gts({10, 20, 30}), 1.0) == 1.0);
  CHECK(*average_precision({}, gts({10}), 1.0) == 0.0);
  CHECK(*average_precision(dets({{10, .5}}), {}, 1.0) == 0.0);
  CHECK_FALSE(average_precision({}, {}, 1.0).has_value());
  std::size_t matched = 0;
  const double ap = *average_precision(dets({{9, .9}, {40, .8}, {30.5, .7}}), gts({10, 30}), 2.0, &matched);
  CHECK(ap == Catch::Approx(5.0 / 6.0).epsilon(1e-15));
  CHECK(matched == 2);
  CHECK(oracle::average_precision({{0, 0, 9000, .9}, {0, 0, 40000, .8}, {0, 0, 30500, .7}}, {{0, 0, 10000}, {0, 0, 30000}},
                                  2000) == Catch::Approx(5.0 / 6.0).epsilon(1e-15));
}

TEST_CASE("average_precision: non-positive tolerance") {
  for (double t : {0.0, -1.0}) {
    try {
      average_precision(dets({{1, 1}}), gts({1}), t);
      FAIL("expected NonPositiveTolerance");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::NonPositiveTolerance);
    }
  }
}

TEST_CASE("average_map: perfect, offset and empty predictions") {
  std::vector<ClassEvalData> perfect(2);
  perfect[0] = {dets({{10, 1}, {50, 1}}), gts({10, 50})};
  perfect[1] = {dets({{70, 1}}), gts({70})};
  CHECK(average_map(perfect, loose_tolerances()).average == 1.0);
  CHECK(average_map(perfect, tight_tolerances()).average == 1.0);

  std::vector<ClassEvalData> offset(1);
  offset[0] = {dets({{20, .9}, {110, .8}}), gts({10, 100})};
  CHECK(average_map(offset, tight_tolerances()).average == 0.0);
  CHECK(std::abs(average_map(offset, loose_tolerances()).average - 11.0 / 12.0) < 1e-12);

  std::vector<ClassEvalData> empty(1);
  empty[0] = {{}, gts({10})};
  const MapResult r = average_map(empty, loose_tolerances());
  for (double m : r.map_per_tolerance) CHECK(m == 0.0);
}

TEST_CASE("evaluate: identical, empty and offset manifests") {
  const DatasetManifest gt = gt_manifest();
  const EvalReport same = evaluate(shifted(gt, 0, 1.0), gt);
  CHECK(same.average_map_loose == 1.0);
  CHECK(same.average_map_tight == 1.0);

  DatasetManifest none = gt;
  for (auto& v : none.videos) v.annotations.clear();
  const EvalReport zero = evaluate(none, gt);
  CHECK(zero.average_map_loose == 0.0);
  CHECK(zero.average_map_tight == 0.0);

  const EvalReport off = evaluate(shifted(gt, 10000, 0.5), gt);
  CHECK(off.average_map_tight == 0.0);
  CHECK(std::abs(off.average_map_loose - 11.0 / 12.0) < 1e-12);
  CHECK(off.counts.predictions == 6);
  CHECK(off.counts.ground_truths == 6);
  CHECK(off.counts.matched.at(10.0) == 6);
  CHECK(off.counts.matched.at(5.0) == 0);
}

TEST_CASE("evaluate: vocabulary and video errors") {
  const DatasetManifest gt = gt_manifest();
  DatasetManifest other = shifted(gt, 0, 1.0);
  other.classes.push_back("Offside");
  CHECK_THROWS_AS(evaluate(other, gt), Error);
  try {
    evaluate(other, gt);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::VocabularyMismatch);
  }
  DatasetManifest stranger = shifted(gt, 0, 1.0);
  stranger.videos[0].path = "elsewhere";
  try {
    evaluate(stranger, gt);
    FAIL("expected UnknownVideoInPredictions");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::UnknownVideoInPredictions);
  }
}

TEST_CASE("evaluate: report serialization uses the declared field names") {
  const DatasetManifest gt = gt_manifest();
  const EvalReport r = evaluate(shifted(gt, 3000, 0.7), gt);
  const auto j = report_to_json(r);
  for (const char* key : {"per_class_ap", "map_per_tolerance", "average_map_loose", "average_map_tight", "counts"}) {
    CHECK(j.contains(key));
  }
  CHECK(j["per_class_ap"]["Goal"]["3"] == 1.0);
  CHECK(j["per_class_ap"]["Goal"]["2"] == 0.0);
  CHECK(j["counts"]["predictions"] == 6);
  const std::string table = format_report_table(r, tight_tolerances());
  CHECK(table.find("Goal") != std::string::npos);
  CHECK(table.find("Card") != std::string::npos);
  CHECK(table == format_report_table(r, tight_tolerances()));
}

TEST_CASE("evaluate: agrees with the brute-force oracle on random scenarios") {
  Rng rng(20240611);
  std::vector<double> grid = loose_tolerances();
  for (double t : tight_tolerances()) grid.push_back(t);
  for (int trial = 0; trial < 200; ++trial) {
    const auto s = testing::random_scenario(rng, 3, 10, 20);
    const EvalReport r = evaluate(s.predictions, s.ground_truth);
    for (double tol : grid) {
      const double want = oracle::mean_ap(s.preds, s.truth, s.classes, static_cast<std::int64_t>(tol * 1000));
      REQUIRE(std::abs(r.map_per_tolerance.at(tol) - want) <= 1e-9);
    }
  }
}

TEST_CASE("invariants: tolerance monotonicity, shift invariance, one-to-one, determinism") {
  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const auto s = testing::random_scenario(rng);
    for (int c = 0; c < s.classes; ++c) {
      std::vector<Detection> p, p_shift;
      std::vector<GroundTruth> g, g_shift;
      std::map<int, std::size_t> preds_per_video, gts_per_video;
      for (const auto& x : s.preds) {
        if (x.cls != c) continue;
        p.push_back({std::to_string(x.video), x.ms, x.conf});
        p_shift.push_back({std::to_string(x.video), x.ms + 123457, x.conf});
      }
      for (const auto& x : s.truth) {
        if (x.cls != c) continue;
        g.push_back({std::to_string(x.video), x.ms});
        g_shift.push_back({std::to_string(x.video), x.ms + 123457});
      }
      double previous = -1.0;
      for (double tol : {1.0, 2.0, 3.5, 5.0, 10.0, 30.0, 60.0}) {
        std::size_t matched = 0;
        const auto ap = average_precision(p, g, tol, &matched);
        if (!ap) continue;
        REQUIRE(*ap >= previous);
        previous = *ap;
        REQUIRE(*average_precision(p_shift, g_shift, tol) == *ap);
        REQUIRE(matched <= std::min(p.size(), g.size()));
        REQUIRE(*average_precision(p, g, tol) == *ap);
      }
    }
  }
}

TEST_CASE("invariants: dropping the lowest-confidence prediction matches the oracle") {
  Rng rng(78);
  for (int trial = 0; trial < 100; ++trial) {
    auto s = testing::random_scenario(rng, 1, 10, 20);
    if (s.preds.empty()) continue;
    std::size_t lowest = 0;
    for (std::size_t i = 1; i < s.preds.size(); ++i) {
      if (s.preds[i].conf < s.preds[lowest].conf) lowest = i;
    }
    auto fewer = s.preds;
    fewer.erase(fewer.begin() + static_cast<std::ptrdiff_t>(lowest));
    std::vector<Detection> p;
    for (const auto& x : fewer) p.push_back({std::to_string(x.video), x.ms, x.conf});
    std::vector<GroundTruth> g;
    for (const auto& x : s.truth) g.push_back({std::to_string(x.video), x.ms});
    const auto got = average_precision(p, g, 5.0);
    const double want = oracle::average_precision(fewer, s.truth, 5000);
    if (want < 0) {
      REQUIRE_FALSE(got.has_value());
    } else {
      REQUIRE(std::abs(*got - want) <= 1e-12);
    }
  }
}
