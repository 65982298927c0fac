// SPDX-License-Identifier: Apache-2.0
#include "spotkit/features.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "spotkit/error.hpp"

namespace spotkit {

namespace {

static_assert(std::endian::native == std::endian::little, "feature files assume a little-endian host");

std::uint32_t read_u32(const char* p) {
  std::uint32_t v;
  std::memcpy(&v, p, 4);
  return v;
}

}  // namespace

std::filesystem::path feature_sidecar_path(const std::filesystem::path& feature_file) {
  auto p = feature_file;
  p.replace_extension(".meta.json");
  return p;
}

FeatureSequence read_feature_file(const std::filesystem::path& file, std::string video_id) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(Errc::FileNotFound, file.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 8) throw Error(Errc::CorruptFeatureFile, file.string() + ": truncated header");

  const std::uint64_t rows = read_u32(bytes.data());
  const std::uint64_t dims = read_u32(bytes.data() + 4);
  const std::uint64_t expected = 8 + rows * dims * 4;
  if (rows == 0 || dims == 0) throw Error(Errc::CorruptFeatureFile, file.string() + ": empty shape");
  if (bytes.size() != expected) {
    throw Error(Errc::CorruptFeatureFile, file.string() + ": header declares " + std::to_string(rows) + "x" +
                                              std::to_string(dims) + " but payload holds " +
                                              std::to_string((bytes.size() - 8) / 4) + " values");
  }

  FeatureSequence seq;
  seq.video_id = video_id.empty() ? file.stem().string() : std::move(video_id);
  seq.data = nn::Tensor({static_cast<std::int64_t>(rows), static_cast<std::int64_t>(dims)});
  const char* payload = bytes.data() + 8;
  for (std::size_t i = 0; i < seq.data.data.size(); ++i) {
    float f;
    std::memcpy(&f, payload + 4 * i, 4);
    if (!std::isfinite(f)) {
      throw Error(Errc::NonFiniteValues, file.string() + ": non-finite value at row " + std::to_string(i / dims));
    }
    seq.data.data[i] = f;
  }

  const auto sidecar = feature_sidecar_path(file);
  if (std::filesystem::exists(sidecar)) {
    std::ifstream meta_in(sidecar);
    try {
      auto meta = nlohmann::json::parse(meta_in);
      if (auto it = meta.find("feature_rate_hz"); it != meta.end()) seq.feature_rate_hz = it->get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::CorruptFeatureFile, sidecar.string() + ": " + e.what());
    }
    if (!(seq.feature_rate_hz > 0.0)) throw Error(Errc::CorruptFeatureFile, sidecar.string() + ": rate must be > 0");
  }
  return seq;
}

void write_feature_file(const std::filesystem::path& file, const nn::Tensor& data, std::optional<double> rate_hz) {
  if (data.rank() != 2) throw Error(Errc::ShapeMismatch, "feature data must be [T, D]");
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write " + file.string());
  const auto rows = static_cast<std::uint32_t>(data.rows());
  const auto dims = static_cast<std::uint32_t>(data.cols());
  out.write(reinterpret_cast<const char*>(&rows), 4);
  out.write(reinterpret_cast<const char*>(&dims), 4);
  std::vector<float> buf(data.data.begin(), data.data.end());
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 4));
  if (!out) throw Error(Errc::IoError, "write failed for " + file.string());
  if (rate_hz) {
    std::ofstream meta(feature_sidecar_path(file), std::ios::trunc);
    meta << nlohmann::ordered_json{{"feature_rate_hz", *rate_hz}, {"rows", rows}, {"dims", dims}}.dump() << "\n";
  }
}

FeatureSequence load_feature_sequence(const VideoEntry& entry, const std::filesystem::path& root) {
  if (!entry.features_path) throw Error(Errc::FileNotFound, "video '" + entry.id() + "' has no features_path");
  return read_feature_file(root / *entry.features_path, entry.id());
}

}  // namespace spotkit
