// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "spotkit/clips.hpp"
#include "spotkit/error.hpp"
#include "spotkit/features.hpp"
#include "spotkit/synthetic.hpp"
#include "spotkit/video.hpp"
#include "test_support.hpp"

using namespace spotkit;
namespace fs = std::filesystem;

namespace {

SynthSpec small_spec() {
  SynthSpec s;
  s.train_videos = 6;
  s.valid_videos = 2;
  s.test_videos = 3;
  s.duration_s = 90.0;
  s.seed = 11;
  return s;
}

std::map<std::string, std::string> tree_bytes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = testing::read_file(e.path());
  }
  return out;
}

std::size_t annotation_count(const DatasetManifest& m) {
  std::size_t n = 0;
  for (const auto& v : m.videos) n += v.annotations.size();
  return n;
}

}  // namespace

TEST_CASE("generate: byte-identical outputs for the same spec") {
  testing::TempDir a, b;
  SynthSpec spec = small_spec();
  spec.render_video = true;
  spec.duration_s = 20.0;
  generate(spec, a.path());
  generate(spec, b.path());
  const auto ta = tree_bytes(a.path()), tb = tree_bytes(b.path());
  CHECK(ta.size() >= 1 + 2 * 11);
  CHECK(ta == tb);
  spec.seed = 12;
  testing::TempDir c;
  generate(spec, c.path());
  CHECK(tree_bytes(c.path()) != ta);
}

TEST_CASE("generate: default spec annotation count is reproducible") {
  testing::TempDir a, b;
  const SynthSpec spec;
  const DatasetManifest ma = generate(spec, a.path());
  const DatasetManifest mb = generate(spec, b.path());
  CHECK(ma.videos.size() == 250);
  CHECK(annotation_count(ma) == annotation_count(mb));
  CHECK(annotation_count(ma) > 0);
  CHECK(testing::read_file(a / kSynthManifestName) == testing::read_file(b / kSynthManifestName));
}

TEST_CASE("generate: events respect the minimum gap and the edge margin") {
  testing::TempDir dir;
  SynthSpec spec = small_spec();
  spec.train_videos = 40;
  spec.events_per_video = 12.0;
  const DatasetManifest m = generate(spec, dir.path());
  for (const auto& v : m.videos) {
    for (std::size_t i = 0; i < v.annotations.size(); ++i) {
      REQUIRE(v.annotations[i].position_ms >= 3000);
      REQUIRE(v.annotations[i].position_ms <= v.duration_ms - 3000);
      for (std::size_t j = i + 1; j < v.annotations.size(); ++j) {
        REQUIRE(std::abs(v.annotations[i].position_ms - v.annotations[j].position_ms) >= 8000);
      }
    }
  }
}

TEST_CASE("generate: zero event rate gives an all-background dataset") {
  testing::TempDir dir;
  SynthSpec spec = small_spec();
  spec.events_per_video = 0.0;
  CHECK(annotation_count(generate(spec, dir.path())) == 0);
}

TEST_CASE("generate: noiseless features decode to exactly the planted events") {
  testing::TempDir dir;
  SynthSpec spec = small_spec();
  spec.noise_sigma = 0.0;
  spec.train_videos = 20;
  const DatasetManifest m = generate(spec, dir.path());
  const nn::Tensor sig = class_signatures(spec);
  const double threshold = 0.5 * std::sqrt(static_cast<double>(spec.feature_dim));
  std::size_t recovered = 0;
  for (const auto& v : m.videos) {
    const FeatureSequence f = load_feature_sequence(v, dir.path());
    // Runs of rows with a strong response; each run is one decoded event.
    std::vector<std::pair<std::int64_t, std::size_t>> decoded;
    std::int64_t t = 0;
    while (t < f.length()) {
      auto norm = [&](std::int64_t r) {
        double s = 0.0;
        for (std::int64_t j = 0; j < f.dim(); ++j) s += f.data(r, j) * f.data(r, j);
        return std::sqrt(s);
      };
      if (norm(t) < threshold) {
        ++t;
        continue;
      }
      std::int64_t best = t;
      while (t < f.length() && norm(t) >= threshold) {
        if (norm(t) > norm(best)) best = t;
        ++t;
      }
      std::size_t cls = 0;
      double top = -1e300;
      for (std::int64_t c = 0; c < sig.rows(); ++c) {
        double dot = 0.0;
        for (std::int64_t j = 0; j < f.dim(); ++j) dot += f.data(best, j) * sig(c, j);
        if (dot > top) {
          top = dot;
          cls = static_cast<std::size_t>(c);
        }
      }
      decoded.emplace_back(best, cls);
    }
    REQUIRE(decoded.size() == v.annotations.size());
    for (std::size_t i = 0; i < decoded.size(); ++i) {
      const auto& a = v.annotations[i];
      REQUIRE(m.classes[decoded[i].second] == a.label);
      REQUIRE(std::abs(decoded[i].first * 500 - a.position_ms) <= 250);
      ++recovered;
    }
  }
  CHECK(recovered == annotation_count(m));
}

TEST_CASE("generate: rendered square flashes only around events") {
  testing::TempDir dir;
  SynthSpec spec = small_spec();
  spec.render_video = true;
  spec.train_videos = 3;
  spec.valid_videos = spec.test_videos = 0;
  spec.duration_s = 40.0;
  const DatasetManifest m = generate(spec, dir.path());
  for (const auto& v : m.videos) {
    DecodeRequest req;
    req.target_fps = spec.render_fps;
    const DecodedFrames frames = decode_video(v, dir.path(), req);
    REQUIRE(frames.frames.shape == nn::Shape{160, 32, 32, 3});
    for (std::int64_t k = 0; k < frames.length(); ++k) {
      const std::int64_t t_ms = k * 250;
      bool flashing = false;
      for (const auto& a : v.annotations) flashing |= t_ms >= a.position_ms - 250 && t_ms < a.position_ms + 250;
      int grey = 0;
      for (std::int64_t p = 0; p < 32 * 32; ++p) {
        bool is_grey = true;
        for (int ch = 0; ch < 3; ++ch) {
          const double x = frames.frames.data[(k * 32 * 32 + p) * 3 + ch] * 255.0;
          is_grey &= std::abs(x - 200.0) <= 8.5;
        }
        grey += is_grey;
      }
      REQUIRE(grey == (flashing ? 0 : 64));
    }
  }
}

TEST_CASE("spec: validation and JSON round trip") {
  SynthSpec bad = small_spec();
  bad.num_classes = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = small_spec();
  bad.min_event_gap_s = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = small_spec();
  bad.noise_sigma = -1.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  try {
    synth_spec_from_json({{"feature_dim", "wide"}});
    FAIL("expected InvalidSpec");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::InvalidSpec);
  }
  const SynthSpec s = small_spec();
  CHECK(synth_spec_to_json(synth_spec_from_json(nlohmann::json::parse(synth_spec_to_json(s).dump()))) == synth_spec_to_json(s));
}

TEST_CASE("signatures: norm sqrt(D)") {
  const nn::Tensor sig = class_signatures(small_spec());
  for (std::int64_t c = 0; c < sig.rows(); ++c) {
    double s = 0.0;
    for (std::int64_t j = 0; j < sig.cols(); ++j) s += sig(c, j) * sig(c, j);
    CHECK(s == Catch::Approx(32.0).epsilon(1e-12));
  }
}
