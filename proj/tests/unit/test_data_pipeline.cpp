// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "spotkit/batching.hpp"
#include "spotkit/error.hpp"
#include "spotkit/features.hpp"
#include "spotkit/video.hpp"
#include "test_support.hpp"

using namespace spotkit;

namespace {

nn::Tensor ramp(std::int64_t rows, std::int64_t cols) {
  nn::Tensor t({rows, cols});
  for (std::int64_t i = 0; i < t.size(); ++i) t.data[i] = static_cast<double>(i % 97) * 0.25 - 3.0;
  return t;
}

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected spotkit::Error");
  return Errc::InvalidArgument;
}

// One features-only video per entry of `lengths`, two events each.
std::shared_ptr<ClipDataset> feature_dataset(const testing::TempDir& dir, const std::vector<std::int64_t>& lengths) {
  DatasetManifest m;
  m.dataset_name = "pipe";
  m.classes = {"a", "b"};
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    const std::string name = "f" + std::to_string(i) + ".osfeat";
    nn::Tensor data = ramp(lengths[i], 3);
    for (std::int64_t r = 0; r < lengths[i]; ++r) data(r, 0) = static_cast<double>(i * 1000 + r);
    write_feature_file(dir / name, data, 2.0);
    VideoEntry v;
    v.features_path = name;
    v.duration_ms = lengths[i] * 500;
    v.fps = 2.0;
    v.annotations.push_back({"a", lengths[i] * 500 / 3, std::nullopt, nlohmann::json::object()});
    v.annotations.push_back({"b", lengths[i] * 500 * 2 / 3, std::nullopt, nlohmann::json::object()});
    m.videos.push_back(v);
  }
  return std::make_shared<ClipDataset>(m, dir.path(), PayloadKind::features);
}

std::vector<ClipBatch> drain(BatchIterator it) {
  std::vector<ClipBatch> out;
  while (auto b = it.next()) out.push_back(std::move(*b));
  return out;
}

}  // namespace

TEST_CASE("features: 90x512 at 2 Hz spans 45 s") {
  testing::TempDir dir;
  write_feature_file(dir / "m.osfeat", ramp(90, 512), 2.0);
  VideoEntry v;
  v.features_path = "m.osfeat";
  const FeatureSequence seq = load_feature_sequence(v, dir.path());
  CHECK(seq.length() == 90);
  CHECK(seq.dim() == 512);
  CHECK(seq.feature_rate_hz == 2.0);
  CHECK(seq.timestamp_s(90) == 45.0);
  // float32 storage of values exactly representable in binary
  CHECK(seq.data == ramp(90, 512));
}

TEST_CASE("features: degenerate 1x1 file and default rate") {
  testing::TempDir dir;
  write_feature_file(dir / "one.osfeat", nn::Tensor({1, 1}, 0.5));
  const FeatureSequence seq = read_feature_file(dir / "one.osfeat");
  CHECK(seq.length() == 1);
  CHECK(seq.dim() == 1);
  CHECK(seq.feature_rate_hz == kDefaultFeatureRateHz);
}

TEST_CASE("features: header declaring more rows than stored is corrupt") {
  testing::TempDir dir;
  write_feature_file(dir / "f.osfeat", ramp(8, 4));
  std::string bytes = testing::read_file(dir / "f.osfeat");
  bytes[0] = 10;  // u32 rows, little-endian
  testing::write_file(dir / "f.osfeat", bytes);
  CHECK(code_of([&] { read_feature_file(dir / "f.osfeat"); }) == Errc::CorruptFeatureFile);
}

TEST_CASE("features: missing file and non-finite values") {
  testing::TempDir dir;
  CHECK(code_of([&] { read_feature_file(dir / "nope.osfeat"); }) == Errc::FileNotFound);
  nn::Tensor bad = ramp(3, 2);
  bad(1, 1) = std::numeric_limits<double>::quiet_NaN();
  write_feature_file(dir / "nan.osfeat", bad);
  CHECK(code_of([&] { read_feature_file(dir / "nan.osfeat"); }) == Errc::NonFiniteValues);
}

TEST_CASE("video: resampling selects round(k * src / target) clamped") {
  for (double src : {25.0, 30.0, 10.0, 4.0}) {
    for (double target : {2.0, 5.0, 4.0, 1.0}) {
      const std::int64_t frames = 57;
      for (std::int64_t k = 0; k < resampled_count(frames, src, target); ++k) {
        const auto expected = std::min<std::int64_t>(
            std::max<std::int64_t>(static_cast<std::int64_t>(std::round(static_cast<double>(k) * src / target)), 0),
            frames - 1);
        REQUIRE(resample_index(k, src, target, frames) == expected);
      }
    }
  }
}

TEST_CASE("video: 45 s at 25 fps decoded at 2 fps gives 90 frames") {
  CHECK(resampled_count(45 * 25, 25.0, 2.0) == 90);
  CHECK(resample_index(1, 25.0, 2.0, 1125) == 13);  // 12.5 rounds away from zero
  CHECK(resampled_count(250, 25.0, 25.0) == 250);
}

TEST_CASE("video: software backend decodes, halves the rate and resizes") {
  testing::TempDir dir;
  RawVideoInfo info;
  info.frames = 10;
  info.height = 8;
  info.width = 16;
  info.channels = 3;
  info.fps = 10.0;
  std::vector<std::uint8_t> raw(static_cast<std::size_t>(10 * 8 * 16 * 3));
  for (std::int64_t f = 0; f < 10; ++f) {
    std::fill_n(raw.begin() + f * 8 * 16 * 3, 8 * 16 * 3, static_cast<std::uint8_t>(f * 25));
  }
  write_raw_video(dir / "v.osvid", info, raw);
  VideoEntry v;
  v.path = "v.osvid";

  DecodeRequest same;
  same.target_fps = 10.0;
  const DecodedFrames all = decode_video(v, dir.path(), same);
  CHECK(all.length() == 10);
  CHECK(all.frames.shape == nn::Shape{10, 8, 16, 3});

  DecodeRequest half;
  half.target_fps = 5.0;
  const DecodedFrames picked = decode_video(v, dir.path(), half);
  REQUIRE(picked.length() == 5);
  const std::int64_t frame_size = 8 * 16 * 3;
  for (std::int64_t k = 0; k < 5; ++k) {
    // constant frames encode their source index
    CHECK(picked.frames.data[k * frame_size] == Catch::Approx(static_cast<double>(2 * k * 25) / 255.0));
  }

  DecodeRequest small;
  small.target_fps = 10.0;
  small.target_height = 4;
  const DecodedFrames resized = decode_video(v, dir.path(), small);
  CHECK(resized.frames.shape == nn::Shape{10, 4, 8, 3});
  for (double x : resized.frames.data) REQUIRE((x >= 0.0 && x <= 1.0));
}

TEST_CASE("video: decoder errors") {
  testing::TempDir dir;
  VideoEntry v;
  v.path = "v.osvid";
  CHECK(code_of([&] { decode_video(v, dir.path(), {}, "no-such-backend"); }) == Errc::DecoderUnavailable);

  RawVideoInfo info;
  info.frames = 1;
  info.height = 2;
  info.width = 2;
  info.fps = 1.0;
  info.codec = "h264";
  write_raw_video(dir / "v.osvid", info, std::vector<std::uint8_t>(12, 0));
  CHECK(code_of([&] { decode_video(v, dir.path(), {}); }) == Errc::UnsupportedCodec);

  info.codec = std::string(kRawVideoCodec);
  write_raw_video(dir / "v.osvid", info, std::vector<std::uint8_t>(12, 0));
  testing::write_file(dir / "v.osvid", "short");
  CHECK(code_of([&] { decode_video(v, dir.path(), {}); }) == Errc::DecodeFailure);
}

TEST_CASE("window_clips: examples") {
  CHECK(window_clips(10, 4, 4) == std::vector<Window>{{0, 0}, {4, 0}, {8, 2}});
  CHECK(window_clips(4, 4, 4) == std::vector<Window>{{0, 0}});
  const auto w = window_clips(10, 4, 2);
  std::vector<std::int64_t> starts;
  for (const auto& x : w) starts.push_back(x.start);
  CHECK(starts == std::vector<std::int64_t>{0, 2, 4, 6, 8});
}

TEST_CASE("window_clips: coverage over a grid of shapes") {
  for (std::int64_t t = 1; t <= 40; ++t) {
    for (std::int64_t l = 1; l <= 9; ++l) {
      for (std::int64_t s = 1; s <= 12; ++s) {
        std::vector<int> covered(static_cast<std::size_t>(t), 0);
        for (const auto& w : window_clips(t, l, s)) {
          REQUIRE(w.start < t);
          REQUIRE(w.pad == std::max<std::int64_t>(0, w.start + l - t));
          for (std::int64_t i = w.start; i < std::min(t, w.start + l); ++i) covered[i] = 1;
        }
        for (int c : covered) REQUIRE(c == 1);
      }
    }
  }
}

TEST_CASE("assign_targets: examples") {
  const std::vector<LabeledEvent> goal{{0, 5000}};
  const ClipTargets clip = assign_targets(0, 16, goal, 2.0, TargetMode::clip_label, 0, 2);
  CHECK(clip.clip_classes == std::vector<int>{1, 0});
  const ClipTargets none = assign_targets(0, 16, {}, 2.0, TargetMode::clip_label, 0, 2);
  CHECK(none.clip_classes == std::vector<int>{0, 0});

  const ClipTargets frames = assign_targets(0, 16, goal, 2.0, TargetMode::frame_label, 1, 2);
  for (std::int64_t r = 0; r < 16; ++r) {
    const bool labeled = r >= 9 && r <= 11;
    CHECK(frames.frame_classes(r, 0) == (labeled ? 1.0 : 0.0));
    CHECK(frames.frame_classes(r, 2) == (labeled ? 0.0 : 1.0));
  }
  const ClipTargets empty = assign_targets(0, 16, {}, 2.0, TargetMode::frame_label, 1, 2);
  for (std::int64_t r = 0; r < 16; ++r) CHECK(empty.frame_classes(r, 2) == 1.0);
}

TEST_CASE("assign_targets: overlaps go to the nearer event, then the lower class") {
  // rows at 2 Hz: class 1 at row 10, class 0 at row 11.2 (5600 ms)
  const std::vector<LabeledEvent> events{{1, 5000}, {0, 5600}};
  const ClipTargets t = assign_targets(0, 16, events, 2.0, TargetMode::frame_label, 2, 2);
  CHECK(t.frame_classes(10, 1) == 1.0);
  CHECK(t.frame_classes(11, 0) == 1.0);
  const std::vector<LabeledEvent> tie{{1, 5000}, {0, 6000}};
  const ClipTargets u = assign_targets(0, 16, tie, 2.0, TargetMode::frame_label, 2, 2);
  CHECK(u.frame_classes(11, 0) == 1.0);  // equidistant from rows 10 and 12
}

TEST_CASE("assign_targets: frame rows are one-hot") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<LabeledEvent> events;
    for (std::uint64_t i = 0, n = rng.below(6); i < n; ++i) {
      events.push_back({rng.below(3), static_cast<std::int64_t>(rng.below(20000))});
    }
    const auto start = static_cast<std::int64_t>(rng.below(30));
    const ClipTargets t = assign_targets(start, 12, events, 2.0, TargetMode::frame_label,
                                         static_cast<std::int64_t>(rng.below(3)), 3);
    for (std::int64_t r = 0; r < 12; ++r) {
      double sum = 0.0;
      for (std::int64_t c = 0; c < 4; ++c) {
        REQUIRE((t.frame_classes(r, c) == 0.0 || t.frame_classes(r, c) == 1.0));
        sum += t.frame_classes(r, c);
      }
      REQUIRE(sum == 1.0);
    }
  }
}

TEST_CASE("batch_iterator: 10 clips in batches of 4") {
  testing::TempDir dir;
  auto ds = feature_dataset(dir, {20});
  PipelineConfig cfg;
  cfg.clip_length = 2;
  cfg.stride = 2;
  cfg.batch_size = 4;
  cfg.shuffle = false;
  const auto batches = drain(batch_iterator(ds, cfg, 1));
  REQUIRE(batches.size() == 3);
  CHECK(batches[0].clips.size() == 4);
  CHECK(batches[1].clips.size() == 4);
  CHECK(batches[2].clips.size() == 2);
  CHECK(batches[2].clips[1].start_index == 18);
}

TEST_CASE("batch_iterator: padding is honest") {
  testing::TempDir dir;
  auto ds = feature_dataset(dir, {11});
  PipelineConfig cfg;
  cfg.clip_length = 4;
  cfg.stride = 4;
  cfg.shuffle = false;
  const auto batches = drain(batch_iterator(ds, cfg, 0));
  const Clip& last = batches.back().clips.back();
  CHECK(last.start_index == 8);
  const auto pad = std::count(last.pad_mask.begin(), last.pad_mask.end(), false);
  CHECK(pad == 1);
  CHECK(last.pad_mask == std::vector<bool>{true, true, true, false});
  for (std::int64_t c = 0; c < 3; ++c) CHECK(last.payload(3, c) == 0.0);
}

TEST_CASE("batch_iterator: same seed gives identical batches regardless of prefetch") {
  testing::TempDir dir;
  auto ds = feature_dataset(dir, {60, 45, 80});
  PipelineConfig cfg;
  cfg.clip_length = 6;
  cfg.stride = 3;
  cfg.batch_size = 5;
  auto run = [&](std::size_t prefetch, std::uint64_t seed) {
    PipelineConfig c = cfg;
    c.prefetch_depth = prefetch;
    return drain(batch_iterator(ds, c, seed));
  };
  const auto a = run(0, 7), b = run(4, 7), c = run(2, 7);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].clips.size() == b[i].clips.size());
    for (std::size_t j = 0; j < a[i].clips.size(); ++j) {
      REQUIRE(a[i].clips[j].payload == b[i].clips[j].payload);
      REQUIRE(a[i].clips[j].payload == c[i].clips[j].payload);
      REQUIRE(a[i].clips[j].video_id == b[i].clips[j].video_id);
      REQUIRE(a[i].clips[j].targets.clip_classes == b[i].clips[j].targets.clip_classes);
    }
  }
}

TEST_CASE("batch_iterator: different seeds give different orders") {
  testing::TempDir dir;
  auto ds = feature_dataset(dir, {200});
  PipelineConfig cfg;
  cfg.clip_length = 2;
  cfg.stride = 2;
  const auto p1 = plan_clips(*ds, cfg, 1, 0);
  const auto p2 = plan_clips(*ds, cfg, 2, 0);
  REQUIRE(p1.size() == 100);
  CHECK(p1 != p2);
  CHECK(plan_clips(*ds, cfg, 1, 0) == p1);
  CHECK(plan_clips(*ds, cfg, 1, 1) != p1);
}

TEST_CASE("batch_iterator: event-centered plans are deterministic and centered") {
  testing::TempDir dir;
  auto ds = feature_dataset(dir, {120, 90});
  PipelineConfig cfg;
  cfg.sampling = Sampling::event_centered;
  cfg.clip_length = 10;
  cfg.center_radius = 1;
  const auto plan = plan_clips(*ds, cfg, 9, 0);
  CHECK(plan == plan_clips(*ds, cfg, 9, 0));
  std::size_t positives = 0;
  for (const auto& ref : plan) {
    const Clip clip = materialize_clip(*ds, ref, cfg);
    positives += std::accumulate(clip.targets.clip_classes.begin(), clip.targets.clip_classes.end(), 0) > 0;
  }
  // two events per video, each positive for 2r+1 = 3 centers
  CHECK(positives == 12);
  // per video: 6 positives and llround(2 * 6) = 12 background windows
  CHECK(plan.size() == 12 + 2 * 12);
}

TEST_CASE("batch_iterator: loader failures carry provenance") {
  testing::TempDir dir;
  DatasetManifest m;
  m.classes = {"a"};
  VideoEntry v;
  v.features_path = "missing_video.osfeat";
  v.duration_ms = 1000;
  m.videos.push_back(v);
  auto ds = std::make_shared<ClipDataset>(m, dir.path(), PayloadKind::features);
  PipelineConfig cfg;
  try {
    drain(batch_iterator(ds, cfg, 0));
    FAIL("expected DataError");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::DataError);
    CHECK(std::string(e.what()).find("missing_video.osfeat") != std::string::npos);
  }
}
