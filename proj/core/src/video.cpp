// SPDX-License-Identifier: Apache-2.0
#include "spotkit/video.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "spotkit/error.hpp"

namespace spotkit {

namespace {

class SoftwareBackend final : public DecodeBackend {
 public:
  DecodedFrames read_source(const std::filesystem::path& file, const std::string& video_id) const override {
    const RawVideoInfo info = read_raw_video_info(file);
    if (info.codec != kRawVideoCodec) throw Error(Errc::UnsupportedCodec, file.string() + ": codec " + info.codec);
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error(Errc::FileNotFound, file.string());
    const auto count = static_cast<std::size_t>(info.frames * info.height * info.width * info.channels);
    std::vector<std::uint8_t> raw(count);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count));
    if (in.gcount() != static_cast<std::streamsize>(count) || in.peek() != std::char_traits<char>::eof()) {
      throw Error(Errc::DecodeFailure, file.string() + ": payload size does not match sidecar shape");
    }
    DecodedFrames out;
    out.video_id = video_id;
    out.frame_rate_hz = info.fps;
    out.frames = nn::Tensor({info.frames, info.height, info.width, info.channels});
    for (std::size_t i = 0; i < count; ++i) out.frames.data[i] = raw[i] / 255.0;
    return out;
  }
};

nn::Tensor resize_bilinear(const nn::Tensor& frames, std::int64_t out_h, std::int64_t out_w) {
  const auto t = frames.dim(0), h = frames.dim(1), w = frames.dim(2), c = frames.dim(3);
  if (out_h == h && out_w == w) return frames;
  nn::Tensor out({t, out_h, out_w, c});
  const double sy = static_cast<double>(h) / out_h, sx = static_cast<double>(w) / out_w;
  for (std::int64_t y = 0; y < out_h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
    const auto y0 = static_cast<std::int64_t>(fy);
    const auto y1 = std::min(y0 + 1, h - 1);
    const double wy = fy - y0;
    for (std::int64_t x = 0; x < out_w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
      const auto x0 = static_cast<std::int64_t>(fx);
      const auto x1 = std::min(x0 + 1, w - 1);
      const double wx = fx - x0;
      for (std::int64_t f = 0; f < t; ++f)
        for (std::int64_t ch = 0; ch < c; ++ch) {
          auto at = [&](std::int64_t yy, std::int64_t xx) { return frames.data[((f * h + yy) * w + xx) * c + ch]; };
          const double top = at(y0, x0) * (1 - wx) + at(y0, x1) * wx;
          const double bottom = at(y1, x0) * (1 - wx) + at(y1, x1) * wx;
          out.data[((f * out_h + y) * out_w + x) * c + ch] = top * (1 - wy) + bottom * wy;
        }
    }
  }
  return out;
}

}  // namespace

DecoderRegistry& DecoderRegistry::global() {
  static DecoderRegistry* registry = [] {
    auto* r = new DecoderRegistry();
    r->register_backend("software", std::make_shared<SoftwareBackend>());
    return r;
  }();
  return *registry;
}

void DecoderRegistry::register_backend(const std::string& name, std::shared_ptr<const DecodeBackend> backend) {
  std::lock_guard lock(mutex_);
  backends_[name] = std::move(backend);
}

std::shared_ptr<const DecodeBackend> DecoderRegistry::get(const std::string& name) const {
  std::lock_guard lock(mutex_);
  auto it = backends_.find(name);
  if (it == backends_.end()) throw Error(Errc::DecoderUnavailable, "no decode backend '" + name + "'");
  return it->second;
}

bool DecoderRegistry::contains(const std::string& name) const {
  std::lock_guard lock(mutex_);
  return backends_.contains(name);
}

std::int64_t resample_index(std::int64_t k, double source_fps, double target_fps, std::int64_t source_frames) {
  const auto idx = static_cast<std::int64_t>(std::llround(static_cast<double>(k) * source_fps / target_fps));
  return std::clamp<std::int64_t>(idx, 0, source_frames - 1);
}

std::int64_t resampled_count(std::int64_t source_frames, double source_fps, double target_fps) {
  const double duration_s = static_cast<double>(source_frames) / source_fps;
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(duration_s * target_fps + 1e-9)));
}

DecodedFrames resample(const DecodedFrames& source, const DecodeRequest& request) {
  if (!(request.target_fps > 0.0)) throw Error(Errc::InvalidArgument, "target_fps must be positive");
  const auto src_t = source.frames.dim(0), h = source.frames.dim(1), w = source.frames.dim(2);
  const auto c = source.frames.dim(3);
  const auto out_t = resampled_count(src_t, source.frame_rate_hz, request.target_fps);
  const auto frame_size = h * w * c;

  nn::Tensor picked({out_t, h, w, c});
  for (std::int64_t k = 0; k < out_t; ++k) {
    const auto src = resample_index(k, source.frame_rate_hz, request.target_fps, src_t);
    std::copy_n(source.frames.data.begin() + src * frame_size, frame_size, picked.data.begin() + k * frame_size);
  }

  DecodedFrames out;
  out.video_id = source.video_id;
  out.frame_rate_hz = request.target_fps;
  if (request.target_height > 0 && request.target_height != h) {
    const auto out_w = std::max<std::int64_t>(
        1, std::llround(static_cast<double>(w) * request.target_height / static_cast<double>(h)));
    out.frames = resize_bilinear(picked, request.target_height, out_w);
  } else {
    out.frames = std::move(picked);
  }
  return out;
}

DecodedFrames decode_video(const VideoEntry& entry, const std::filesystem::path& root, const DecodeRequest& request,
                           const std::string& backend) {
  if (!entry.path) throw Error(Errc::FileNotFound, "video entry '" + entry.id() + "' has no path");
  auto decoder = DecoderRegistry::global().get(backend);
  return resample(decoder->read_source(root / *entry.path, entry.id()), request);
}

std::filesystem::path video_sidecar_path(const std::filesystem::path& video_file) {
  auto p = video_file;
  p.replace_extension(".meta.json");
  return p;
}

void write_raw_video(const std::filesystem::path& file, const RawVideoInfo& info, std::span<const std::uint8_t> data) {
  if (static_cast<std::int64_t>(data.size()) != info.frames * info.height * info.width * info.channels) {
    throw Error(Errc::ShapeMismatch, "raw video payload does not match shape");
  }
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write " + file.string());
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  std::ofstream meta(video_sidecar_path(file), std::ios::trunc);
  meta << nlohmann::ordered_json{{"frames", info.frames},     {"height", info.height}, {"width", info.width},
                                 {"channels", info.channels}, {"fps", info.fps},       {"codec", info.codec}}
              .dump()
       << "\n";
  if (!out || !meta) throw Error(Errc::IoError, "write failed for " + file.string());
}

RawVideoInfo read_raw_video_info(const std::filesystem::path& file) {
  if (!std::filesystem::exists(file)) throw Error(Errc::FileNotFound, file.string());
  const auto sidecar = video_sidecar_path(file);
  std::ifstream in(sidecar);
  if (!in) throw Error(Errc::DecodeFailure, "missing sidecar " + sidecar.string());
  RawVideoInfo info;
  try {
    auto j = nlohmann::json::parse(in);
    info.frames = j.at("frames").get<std::int64_t>();
    info.height = j.at("height").get<std::int64_t>();
    info.width = j.at("width").get<std::int64_t>();
    info.channels = j.value("channels", std::int64_t{3});
    info.fps = j.at("fps").get<double>();
    info.codec = j.value("codec", std::string(kRawVideoCodec));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::DecodeFailure, sidecar.string() + ": " + e.what());
  }
  if (info.frames <= 0 || info.height <= 0 || info.width <= 0 || info.channels <= 0 || !(info.fps > 0.0)) {
    throw Error(Errc::DecodeFailure, sidecar.string() + ": invalid shape or rate");
  }
  return info;
}

}  // namespace spotkit
