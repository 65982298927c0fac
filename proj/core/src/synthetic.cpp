// SPDX-License-Identifier: Apache-2.0
#include "spotkit/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "spotkit/error.hpp"
#include "spotkit/features.hpp"
#include "spotkit/rng.hpp"
#include "spotkit/video.hpp"

namespace spotkit {

void SynthSpec::validate() const {
  auto fail = [](const std::string& what) { throw Error(Errc::InvalidSpec, what); };
  if (num_classes < 1) fail("num_classes must be >= 1");
  if (!(duration_s > 0.0)) fail("duration_s must be > 0");
  if (!(feature_rate_hz > 0.0)) fail("feature_rate_hz must be > 0");
  if (feature_dim < 1) fail("feature_dim must be >= 1");
  if (!(events_per_video >= 0.0)) fail("events_per_video must be >= 0");
  if (!(signature_strength > 0.0)) fail("signature_strength must be > 0");
  if (!(noise_sigma >= 0.0)) fail("noise_sigma must be >= 0");
  if (!(min_event_gap_s > 0.0)) fail("min_event_gap_s must be > 0");
  if (!(edge_margin_s >= 0.0) || 2.0 * edge_margin_s >= duration_s) fail("edge_margin_s must leave room for events");
  if (!(bump_half_width_s > 0.0)) fail("bump_half_width_s must be > 0");
  if (render_video) {
    if (!(render_fps > 0.0)) fail("render_fps must be > 0");
    if (frame_size < 4) fail("frame_size must be >= 4");
    if (!(flash_s > 0.0)) fail("flash_s must be > 0");
  }
  if (dataset_name.empty()) fail("dataset_name must be non-empty");
}

nlohmann::ordered_json synth_spec_to_json(const SynthSpec& s) {
  return {{"num_classes", s.num_classes},
          {"train_videos", s.train_videos},
          {"valid_videos", s.valid_videos},
          {"test_videos", s.test_videos},
          {"duration_s", s.duration_s},
          {"feature_rate_hz", s.feature_rate_hz},
          {"feature_dim", s.feature_dim},
          {"events_per_video", s.events_per_video},
          {"signature_strength", s.signature_strength},
          {"noise_sigma", s.noise_sigma},
          {"min_event_gap_s", s.min_event_gap_s},
          {"edge_margin_s", s.edge_margin_s},
          {"bump_half_width_s", s.bump_half_width_s},
          {"seed", s.seed},
          {"render_video", s.render_video},
          {"render_fps", s.render_fps},
          {"frame_size", s.frame_size},
          {"flash_s", s.flash_s},
          {"dataset_name", s.dataset_name}};
}

SynthSpec synth_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(Errc::InvalidSpec, "synthetic spec must be an object");
  SynthSpec s;
  try {
    s.num_classes = j.value("num_classes", s.num_classes);
    s.train_videos = j.value("train_videos", s.train_videos);
    s.valid_videos = j.value("valid_videos", s.valid_videos);
    s.test_videos = j.value("test_videos", s.test_videos);
    s.duration_s = j.value("duration_s", s.duration_s);
    s.feature_rate_hz = j.value("feature_rate_hz", s.feature_rate_hz);
    s.feature_dim = j.value("feature_dim", s.feature_dim);
    s.events_per_video = j.value("events_per_video", s.events_per_video);
    s.signature_strength = j.value("signature_strength", s.signature_strength);
    s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
    s.min_event_gap_s = j.value("min_event_gap_s", s.min_event_gap_s);
    s.edge_margin_s = j.value("edge_margin_s", s.edge_margin_s);
    s.bump_half_width_s = j.value("bump_half_width_s", s.bump_half_width_s);
    s.seed = j.value("seed", s.seed);
    s.render_video = j.value("render_video", s.render_video);
    s.render_fps = j.value("render_fps", s.render_fps);
    s.frame_size = j.value("frame_size", s.frame_size);
    s.flash_s = j.value("flash_s", s.flash_s);
    s.dataset_name = j.value("dataset_name", s.dataset_name);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidSpec, std::string("synthetic spec: ") + e.what());
  }
  s.validate();
  return s;
}

nn::Tensor class_signatures(const SynthSpec& spec) {
  Rng rng(derive_seed(spec.seed, 0));
  const auto c = static_cast<std::int64_t>(spec.num_classes), d = spec.feature_dim;
  nn::Tensor sig({c, d});
  for (std::int64_t k = 0; k < c; ++k) {
    double sq = 0.0;
    for (std::int64_t j = 0; j < d; ++j) {
      sig(k, j) = rng.normal();
      sq += sig(k, j) * sig(k, j);
    }
    const double scale = std::sqrt(static_cast<double>(d)) / std::max(std::sqrt(sq), 1e-12);
    for (std::int64_t j = 0; j < d; ++j) sig(k, j) *= scale;
  }
  return sig;
}

namespace {

struct PlantedEvent {
  std::int64_t position_ms;
  std::size_t class_index;
};

std::vector<PlantedEvent> plant_events(const SynthSpec& spec, Rng& rng) {
  const std::uint64_t count = rng.poisson(spec.events_per_video);
  const auto lo = std::llround(spec.edge_margin_s * 1000.0);
  const auto hi = std::llround((spec.duration_s - spec.edge_margin_s) * 1000.0);
  const auto gap = std::llround(spec.min_event_gap_s * 1000.0);
  std::vector<PlantedEvent> events;
  for (std::uint64_t n = 0; n < count; ++n) {
    for (int attempt = 0; attempt < 200; ++attempt) {
      const auto pos = lo + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
      const bool clear = std::all_of(events.begin(), events.end(),
                                     [&](const PlantedEvent& e) { return std::abs(e.position_ms - pos) >= gap; });
      if (clear) {
        events.push_back({pos, static_cast<std::size_t>(rng.below(spec.num_classes))});
        break;
      }
    }
  }
  std::sort(events.begin(), events.end(),
            [](const PlantedEvent& a, const PlantedEvent& b) { return a.position_ms < b.position_ms; });
  return events;
}

nn::Tensor synth_features(const SynthSpec& spec, const nn::Tensor& signatures, const std::vector<PlantedEvent>& events,
                          Rng& rng) {
  const auto rows = static_cast<std::int64_t>(std::floor(spec.duration_s * spec.feature_rate_hz + 1e-9));
  const auto d = spec.feature_dim;
  nn::Tensor f({rows, d});
  for (double& v : f.data) v = spec.noise_sigma > 0.0 ? rng.normal(0.0, spec.noise_sigma) : 0.0;
  for (const PlantedEvent& e : events) {
    const double center = static_cast<double>(e.position_ms) / 1000.0;
    for (std::int64_t t = 0; t < rows; ++t) {
      const double w = 1.0 - std::abs(static_cast<double>(t) / spec.feature_rate_hz - center) / spec.bump_half_width_s;
      if (w <= 0.0) continue;
      for (std::int64_t j = 0; j < d; ++j) {
        f(t, j) += spec.signature_strength * w * signatures(static_cast<std::int64_t>(e.class_index), j);
      }
    }
  }
  return f;
}

std::array<std::uint8_t, 3> class_color(std::size_t c) {
  static const std::array<std::array<std::uint8_t, 3>, 6> palette{
      {{230, 30, 30}, {30, 210, 30}, {40, 60, 240}, {230, 210, 20}, {200, 40, 220}, {20, 210, 210}}};
  if (c < palette.size()) return palette[c];
  const auto v = static_cast<std::uint8_t>(40 + (c * 53) % 200);
  return {v, static_cast<std::uint8_t>(255 - v), static_cast<std::uint8_t>((v * 3) % 256)};
}

std::vector<std::uint8_t> render_frames(const SynthSpec& spec, const std::vector<PlantedEvent>& events,
                                        std::int64_t frames, Rng& rng) {
  const auto size = spec.frame_size;
  const std::int64_t square = std::max<std::int64_t>(2, size / 4);
  const double x0 = rng.uniform(0.0, static_cast<double>(size)), y0 = rng.uniform(0.0, static_cast<double>(size));
  const double vx = rng.uniform(-6.0, 6.0), vy = rng.uniform(-6.0, 6.0);  // pixels per second
  const auto half_flash = std::llround(spec.flash_s * 500.0);
  std::vector<std::uint8_t> out(static_cast<std::size_t>(frames * size * size * 3));
  for (std::int64_t k = 0; k < frames; ++k) {
    const auto t_ms = std::llround(static_cast<double>(k) * 1000.0 / spec.render_fps);
    std::array<std::uint8_t, 3> color{200, 200, 200};
    for (const PlantedEvent& e : events) {
      if (t_ms >= e.position_ms - half_flash && t_ms < e.position_ms + half_flash) color = class_color(e.class_index);
    }
    const double t = static_cast<double>(t_ms) / 1000.0;
    auto wrap = [size](double v) {
      const double m = std::fmod(v, static_cast<double>(size));
      return static_cast<std::int64_t>(std::floor(m < 0 ? m + static_cast<double>(size) : m));
    };
    const auto px = wrap(x0 + vx * t), py = wrap(y0 + vy * t);
    std::uint8_t* frame = out.data() + k * size * size * 3;
    for (std::int64_t y = 0; y < size; ++y) {
      for (std::int64_t x = 0; x < size; ++x) {
        const bool inside = ((x - px + size) % size) < square && ((y - py + size) % size) < square;
        for (int ch = 0; ch < 3; ++ch) {
          const int noise = static_cast<int>(rng.below(17)) - 8;
          const int base = inside ? color[ch] : 40;
          frame[(y * size + x) * 3 + ch] = static_cast<std::uint8_t>(std::clamp(base + noise, 0, 255));
        }
      }
    }
  }
  return out;
}

}  // namespace

DatasetManifest generate(const SynthSpec& spec, const std::filesystem::path& out_root) {
  spec.validate();
  const nn::Tensor signatures = class_signatures(spec);

  DatasetManifest manifest;
  manifest.dataset_name = spec.dataset_name;
  for (std::size_t c = 0; c < spec.num_classes; ++c) manifest.classes.push_back("class_" + std::to_string(c));
  manifest.metadata = {{"generator", "synthetic"}, {"spec", nlohmann::json::parse(synth_spec_to_json(spec).dump())}};

  const std::pair<Split, std::size_t> splits[] = {
      {Split::train, spec.train_videos}, {Split::valid, spec.valid_videos}, {Split::test, spec.test_videos}};
  std::uint64_t stream = 1;
  for (const auto& [split, count] : splits) {
    for (std::size_t i = 0; i < count; ++i, ++stream) {
      Rng rng(derive_seed(spec.seed, stream));
      const std::string split_name(to_string(split));
      char name[64];
      std::snprintf(name, sizeof name, "%s_%04zu", split_name.c_str(), i);
      const std::vector<PlantedEvent> events = plant_events(spec, rng);

      VideoEntry entry;
      entry.split = split;
      entry.duration_ms = std::llround(spec.duration_s * 1000.0);
      entry.fps = spec.render_video ? spec.render_fps : spec.feature_rate_hz;
      const std::string feature_rel = "features/" + split_name + "/" + name + ".osfeat";
      write_feature_file(out_root / feature_rel, synth_features(spec, signatures, events, rng), spec.feature_rate_hz);
      entry.features_path = feature_rel;

      if (spec.render_video) {
        const auto frames = static_cast<std::int64_t>(std::floor(spec.duration_s * spec.render_fps + 1e-9));
        const std::string video_rel = "videos/" + split_name + "/" + name + ".osvid";
        RawVideoInfo info;
        info.frames = frames;
        info.height = info.width = spec.frame_size;
        info.channels = 3;
        info.fps = spec.render_fps;
        const auto pixels = render_frames(spec, events, frames, rng);
        write_raw_video(out_root / video_rel, info, pixels);
        entry.path = video_rel;
      }
      for (const PlantedEvent& e : events) {
        entry.annotations.push_back({manifest.classes[e.class_index], e.position_ms, std::nullopt, nlohmann::json::object()});
      }
      entry.metadata = {{"name", name}};
      manifest.videos.push_back(std::move(entry));
    }
  }
  save_manifest(manifest, out_root / kSynthManifestName);
  return manifest;
}

}  // namespace spotkit
