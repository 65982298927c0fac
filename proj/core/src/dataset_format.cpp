// SPDX-License-Identifier: Apache-2.0
#include "spotkit/dataset_format.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>
#include <unordered_set>

#include "spotkit/error.hpp"

namespace spotkit {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test: return "test";
    case Split::challenge: return "challenge";
  }
  return "train";
}

std::optional<Split> split_from_string(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "valid") return Split::valid;
  if (name == "test") return Split::test;
  if (name == "challenge") return Split::challenge;
  return std::nullopt;
}

const std::string& VideoEntry::id() const {
  static const std::string kEmpty;
  if (path) return *path;
  if (features_path) return *features_path;
  return kEmpty;
}

std::optional<std::size_t> DatasetManifest::class_index(std::string_view name) const {
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (classes[i] == name) return i;
  }
  return std::nullopt;
}

bool ValidationReport::has_error(std::string_view code) const {
  return std::any_of(errors.begin(), errors.end(), [&](const auto& e) { return e.code == code; });
}

bool ValidationReport::has_warning(std::string_view code) const {
  return std::any_of(warnings.begin(), warnings.end(), [&](const auto& w) { return w.code == code; });
}

namespace {

[[noreturn]] void schema_error(const std::string& where, const std::string& what) {
  throw Error(Errc::SchemaViolation, where + ": " + what);
}

const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) schema_error(where, std::string("missing required field '") + key + "'");
  return *it;
}

std::string require_string(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_string()) schema_error(where + "/" + key, "expected string");
  return v.get<std::string>();
}

std::int64_t require_int(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_number_integer()) schema_error(where + "/" + key, "expected integer");
  return v.get<std::int64_t>();
}

std::optional<std::string> optional_string(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) schema_error(where + "/" + key, "expected string");
  return it->get<std::string>();
}

json read_metadata(const json& obj, const std::string& where) {
  auto it = obj.find("metadata");
  if (it == obj.end()) return json::object();
  if (!it->is_object()) schema_error(where + "/metadata", "expected object");
  return *it;
}

// Keys not in `known` are folded into metadata without overwriting existing keys.
void fold_unknown_keys(const json& obj, std::initializer_list<std::string_view> known, json& metadata) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    const bool is_known = std::find(known.begin(), known.end(), it.key()) != known.end();
    if (!is_known && !metadata.contains(it.key())) metadata[it.key()] = it.value();
  }
}

Annotation parse_annotation(const json& obj, const std::string& where) {
  if (!obj.is_object()) schema_error(where, "expected object");
  Annotation a;
  a.label = require_string(obj, "label", where);
  a.position_ms = require_int(obj, "position_ms", where);
  if (auto it = obj.find("confidence"); it != obj.end() && !it->is_null()) {
    if (!it->is_number()) schema_error(where + "/confidence", "expected number");
    a.confidence = it->get<double>();
  }
  a.metadata = read_metadata(obj, where);
  fold_unknown_keys(obj, {"label", "position_ms", "confidence", "metadata"}, a.metadata);
  return a;
}

VideoEntry parse_video(const json& obj, const std::string& where) {
  if (!obj.is_object()) schema_error(where, "expected object");
  VideoEntry v;
  v.path = optional_string(obj, "path", where);
  v.features_path = optional_string(obj, "features_path", where);
  v.duration_ms = require_int(obj, "duration_ms", where);
  if (auto it = obj.find("fps"); it != obj.end()) {
    if (!it->is_number()) schema_error(where + "/fps", "expected number");
    v.fps = it->get<double>();
  }
  const std::string split = require_string(obj, "split", where);
  auto parsed = split_from_string(split);
  if (!parsed) schema_error(where + "/split", "unknown split '" + split + "'");
  v.split = *parsed;
  if (auto it = obj.find("annotations"); it != obj.end()) {
    if (!it->is_array()) schema_error(where + "/annotations", "expected array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      v.annotations.push_back(parse_annotation((*it)[i], where + "/annotations/" + std::to_string(i)));
    }
  }
  v.metadata = read_metadata(obj, where);
  fold_unknown_keys(obj, {"path", "features_path", "duration_ms", "fps", "split", "annotations", "metadata"},
                    v.metadata);
  return v;
}

// A null metadata value (from `{}` brace-initialization) is written as an empty object.
ordered_json to_ordered(const json& value) {
  return value.is_null() ? ordered_json::object() : ordered_json::parse(value.dump());
}

}  // namespace

DatasetManifest parse_manifest(std::string_view text, ParseOptions options) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw Error(Errc::MalformedDocument, e.what());
  }
  if (!doc.is_object()) throw Error(Errc::SchemaViolation, "top level must be a JSON object");

  DatasetManifest m;
  m.format_version = require_string(doc, "format_version", "");
  if (m.format_version != kManifestFormatVersion) {
    throw Error(Errc::UnknownVersion, "format_version '" + m.format_version + "' is not supported");
  }
  m.dataset_name = require_string(doc, "dataset_name", "");

  const json& classes = require(doc, "classes", "");
  if (!classes.is_array()) schema_error("/classes", "expected array");
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (!classes[i].is_string()) schema_error("/classes/" + std::to_string(i), "expected string");
    m.classes.push_back(classes[i].get<std::string>());
  }

  const json& videos = require(doc, "videos", "");
  if (!videos.is_array()) schema_error("/videos", "expected array");
  m.videos.reserve(videos.size());
  for (std::size_t i = 0; i < videos.size(); ++i) {
    m.videos.push_back(parse_video(videos[i], "/videos/" + std::to_string(i)));
  }

  m.metadata = read_metadata(doc, "");
  fold_unknown_keys(doc, {"format_version", "dataset_name", "classes", "videos", "metadata"}, m.metadata);

  if (options.strict) {
    ValidationReport report = validate_manifest(m, ValidateOptions{});
    if (!report.is_valid()) {
      const auto& first = report.errors.front();
      throw Error(Errc::SchemaViolation, first.location + ": " + first.code + ": " + first.message);
    }
  }
  return m;
}

ValidationReport validate_manifest(const DatasetManifest& m, const ValidateOptions& options) {
  ValidationReport report;
  auto error = [&](std::string_view code, std::string location, std::string message) {
    report.errors.push_back({std::string(code), std::move(location), std::move(message)});
  };
  auto error_or_warning = [&](std::string_view code, std::string location, std::string message) {
    auto& sink = options.strict ? report.errors : report.warnings;
    sink.push_back({std::string(code), std::move(location), std::move(message)});
  };

  if (m.format_version != kManifestFormatVersion) {
    error(codes::kUnknownVersion, "/format_version", "unsupported version '" + m.format_version + "'");
  }

  std::unordered_set<std::string> class_names;
  for (std::size_t i = 0; i < m.classes.size(); ++i) {
    const auto& name = m.classes[i];
    const std::string loc = "/classes/" + std::to_string(i);
    if (name.empty()) error(codes::kEmptyClassName, loc, "class name is empty");
    if (!class_names.insert(name).second) error(codes::kDuplicateClass, loc, "duplicate class '" + name + "'");
  }

  std::unordered_set<std::string> video_ids;
  for (std::size_t vi = 0; vi < m.videos.size(); ++vi) {
    const VideoEntry& v = m.videos[vi];
    const std::string vloc = "/videos/" + std::to_string(vi);
    if (!v.path && !v.features_path) {
      error(codes::kMissingMedia, vloc, "neither path nor features_path is set");
    } else if (!video_ids.insert(v.id()).second) {
      error(codes::kDuplicateVideo, vloc, "duplicate video '" + v.id() + "'");
    }
    if (!(v.fps > 0.0) || !std::isfinite(v.fps)) error(codes::kNonPositiveFps, vloc + "/fps", "fps must be positive");
    if (v.duration_ms < 0 || (v.duration_ms == 0 && !v.annotations.empty())) {
      error(codes::kNonPositiveDuration, vloc + "/duration_ms", "duration must be positive when annotated");
    }
    if (options.media_root) {
      for (const auto* p : {&v.path, &v.features_path}) {
        if (*p && !std::filesystem::exists(*options.media_root / **p)) {
          error_or_warning(codes::kMissingFile, vloc, "file not found: " + **p);
        }
      }
    }
    for (std::size_t ai = 0; ai < v.annotations.size(); ++ai) {
      const Annotation& a = v.annotations[ai];
      const std::string aloc = vloc + "/annotations/" + std::to_string(ai);
      if (!class_names.contains(a.label)) {
        error(codes::kUnknownLabel, aloc + "/label", "label '" + a.label + "' is not in classes");
      }
      if (a.position_ms < 0) {
        error(codes::kNegativePosition, aloc + "/position_ms", "position is negative");
      } else if (a.position_ms > v.duration_ms) {
        error_or_warning(codes::kPositionOutOfRange, aloc + "/position_ms",
                         std::to_string(a.position_ms) + " ms exceeds duration " + std::to_string(v.duration_ms) +
                             " ms");
      }
      if (a.confidence) {
        const double c = *a.confidence;
        if (!(c >= 0.0 && c <= 1.0)) error(codes::kConfidenceOutOfRange, aloc + "/confidence", "not in [0,1]");
      } else if (options.require_confidence) {
        error(codes::kMissingConfidence, aloc, "prediction annotation without confidence");
      }
    }
  }
  return report;
}

std::string serialize_manifest(const DatasetManifest& m) {
  ValidationReport report = validate_manifest(m, ValidateOptions{});
  if (!report.is_valid()) {
    const auto& first = report.errors.front();
    throw Error(Errc::InvalidManifest, first.location + ": " + first.code + ": " + first.message);
  }

  ordered_json doc = ordered_json::object();
  doc["format_version"] = m.format_version;
  doc["dataset_name"] = m.dataset_name;
  doc["classes"] = m.classes;
  ordered_json videos = ordered_json::array();
  for (const VideoEntry& v : m.videos) {
    ordered_json jv = ordered_json::object();
    if (v.path) jv["path"] = *v.path;
    if (v.features_path) jv["features_path"] = *v.features_path;
    jv["duration_ms"] = v.duration_ms;
    jv["fps"] = v.fps;
    jv["split"] = std::string(to_string(v.split));
    ordered_json annotations = ordered_json::array();
    for (const Annotation& a : v.annotations) {
      ordered_json ja = ordered_json::object();
      ja["label"] = a.label;
      ja["position_ms"] = a.position_ms;
      if (a.confidence) ja["confidence"] = *a.confidence;
      ja["metadata"] = to_ordered(a.metadata);
      annotations.push_back(std::move(ja));
    }
    jv["annotations"] = std::move(annotations);
    jv["metadata"] = to_ordered(v.metadata);
    videos.push_back(std::move(jv));
  }
  doc["videos"] = std::move(videos);
  doc["metadata"] = to_ordered(m.metadata);
  return doc.dump(2, ' ', false) + "\n";
}

DatasetManifest filter_split(const DatasetManifest& m, Split split) {
  DatasetManifest out;
  out.format_version = m.format_version;
  out.dataset_name = m.dataset_name;
  out.classes = m.classes;
  out.metadata = m.metadata;
  for (const auto& v : m.videos) {
    if (v.split == split) out.videos.push_back(v);
  }
  return out;
}

DatasetManifest load_manifest(const std::filesystem::path& path, ParseOptions options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::FileNotFound, path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_manifest(buffer.str(), options);
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  const std::string text = serialize_manifest(manifest);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error(Errc::IoError, "write failed for " + path.string());
}

// ---------------------------------------------------------------------------

LegacyMappingConfig parse_legacy_mapping(const json& doc) {
  LegacyMappingConfig c;
  if (!doc.is_object()) throw Error(Errc::ConfigError, "legacy mapping must be a JSON object");
  try {
    auto get = [&](const char* key, auto& field) {
      if (auto it = doc.find(key); it != doc.end() && !it->is_null()) it->get_to(field);
    };
    get("label_file_name", c.label_file_name);
    get("annotations_field", c.annotations_field);
    get("label_field", c.label_field);
    get("game_time_field", c.game_time_field);
    get("position_field", c.position_field);
    if (auto it = doc.find("half_field"); it != doc.end() && it->is_string()) c.half_field = it->get<std::string>();
    get("halves", c.halves);
    get("video_pattern", c.video_pattern);
    if (auto it = doc.find("features_pattern"); it != doc.end() && it->is_string()) {
      c.features_pattern = it->get<std::string>();
    }
    get("fps", c.fps);
    get("half_duration_ms", c.half_duration_ms);
    get("dataset_name", c.dataset_name);
    get("classes", c.classes);
    get("label_map", c.label_map);
    get("matches", c.matches);
    get("strict", c.strict);
    if (auto it = doc.find("default_split"); it != doc.end()) {
      auto s = split_from_string(it->get<std::string>());
      if (!s) throw Error(Errc::ConfigError, "unknown default_split");
      c.default_split = *s;
    }
    if (auto it = doc.find("splits"); it != doc.end()) {
      for (auto kv = it->begin(); kv != it->end(); ++kv) {
        auto s = split_from_string(kv.value().get<std::string>());
        if (!s) throw Error(Errc::ConfigError, "unknown split for match " + kv.key());
        c.splits[kv.key()] = *s;
      }
    }
  } catch (const json::exception& e) {
    throw Error(Errc::ConfigError, std::string("legacy mapping: ") + e.what());
  }
  return c;
}

namespace {

std::string substitute(std::string pattern, const std::string& match, int half) {
  auto replace_all = [&](const std::string& token, const std::string& value) {
    for (std::size_t pos = pattern.find(token); pos != std::string::npos;
         pos = pattern.find(token, pos + value.size())) {
      pattern.replace(pos, token.size(), value);
    }
  };
  replace_all("{match}", match);
  replace_all("{half}", std::to_string(half));
  return pattern;
}

struct GameTime {
  std::optional<int> half;
  int minutes = 0;
  int seconds = 0;
  std::string clock;  // "MM:SS"
};

GameTime parse_game_time(const std::string& text, const std::string& where) {
  static const std::regex with_half(R"(^\s*(\d+)\s*-\s*(\d+):(\d{2})\s*$)");
  static const std::regex clock_only(R"(^\s*(\d+):(\d{2})\s*$)");
  std::smatch m;
  GameTime gt;
  if (std::regex_match(text, m, with_half)) {
    gt.half = std::stoi(m[1].str());
    gt.minutes = std::stoi(m[2].str());
    gt.seconds = std::stoi(m[3].str());
  } else if (std::regex_match(text, m, clock_only)) {
    gt.minutes = std::stoi(m[1].str());
    gt.seconds = std::stoi(m[2].str());
  } else {
    throw Error(Errc::UnparseableGameTime, where + ": '" + text + "'");
  }
  if (gt.seconds >= 60) throw Error(Errc::UnparseableGameTime, where + ": seconds out of range in '" + text + "'");
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%02d:%02d", gt.minutes, gt.seconds);
  gt.clock = buf;
  return gt;
}

std::optional<std::int64_t> parse_position(const json& v) {
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_string()) {
    const auto& s = v.get_ref<const std::string&>();
    if (s.empty() || !std::all_of(s.begin(), s.end(), [](unsigned char ch) { return std::isdigit(ch); })) {
      return std::nullopt;
    }
    return std::stoll(s);
  }
  return std::nullopt;
}

}  // namespace

ConversionResult convert_legacy(const std::filesystem::path& root, const LegacyMappingConfig& mapping) {
  namespace fs = std::filesystem;
  ConversionResult result;

  std::vector<std::string> match_dirs;
  if (!mapping.matches.empty()) {
    for (const auto& match : mapping.matches) {
      if (!fs::is_regular_file(root / match / mapping.label_file_name)) {
        throw Error(Errc::MissingLabelFile, (root / match / mapping.label_file_name).string());
      }
      match_dirs.push_back(match);
    }
  } else if (fs::is_directory(root)) {
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
      if (entry.is_regular_file() && entry.path().filename() == mapping.label_file_name) {
        match_dirs.push_back(fs::relative(entry.path().parent_path(), root).generic_string());
      }
    }
    std::sort(match_dirs.begin(), match_dirs.end());
  } else {
    throw Error(Errc::MissingLabelFile, "legacy root is not a directory: " + root.string());
  }
  if (match_dirs.empty()) result.warnings.push_back("no '" + mapping.label_file_name + "' files found");

  const std::set<std::string> allowed(mapping.classes.begin(), mapping.classes.end());
  std::set<std::string> seen_classes;
  std::vector<VideoEntry> videos;

  for (const auto& match : match_dirs) {
    const fs::path label_path = root / match / mapping.label_file_name;
    std::ifstream in(label_path, std::ios::binary);
    if (!in) throw Error(Errc::MissingLabelFile, label_path.string());
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw Error(Errc::MalformedDocument, label_path.string() + ": " + e.what());
    }
    auto ann_it = doc.find(mapping.annotations_field);
    if (ann_it == doc.end() || !ann_it->is_array()) {
      throw Error(Errc::SchemaViolation, label_path.string() + ": missing '" + mapping.annotations_field + "' array");
    }

    std::map<int, std::vector<Annotation>> per_half;
    for (int h : mapping.halves) per_half[h];

    for (std::size_t i = 0; i < ann_it->size(); ++i) {
      const json& raw = (*ann_it)[i];
      const std::string where = label_path.string() + "#" + std::to_string(i);
      ++result.annotations_read;

      if (!raw.contains(mapping.label_field) || !raw[mapping.label_field].is_string()) {
        throw Error(Errc::SchemaViolation, where + ": missing label");
      }
      const std::string legacy_label = raw[mapping.label_field].get<std::string>();

      std::optional<GameTime> game_time;
      if (auto it = raw.find(mapping.game_time_field); it != raw.end()) {
        if (!it->is_string()) throw Error(Errc::UnparseableGameTime, where + ": game time is not a string");
        game_time = parse_game_time(it->get<std::string>(), where);
      }
      std::optional<int> half;
      if (mapping.half_field) {
        if (auto it = raw.find(*mapping.half_field); it != raw.end()) {
          if (it->is_number_integer()) half = it->get<int>();
          else if (it->is_string()) half = std::stoi(it->get<std::string>());
        }
      } else if (game_time) {
        half = game_time->half;
      }
      if (!half) throw Error(Errc::UnparseableGameTime, where + ": no half indicator");
      if (!per_half.contains(*half)) {
        throw Error(Errc::SchemaViolation, where + ": half " + std::to_string(*half) + " not in mapping.halves");
      }

      std::optional<std::int64_t> position;
      if (auto it = raw.find(mapping.position_field); it != raw.end()) {
        position = parse_position(*it);
        if (!position) throw Error(Errc::SchemaViolation, where + ": unparseable position");
      } else if (game_time) {
        position = (std::int64_t{game_time->minutes} * 60 + game_time->seconds) * 1000;
      } else {
        throw Error(Errc::SchemaViolation, where + ": neither position nor game time present");
      }

      auto mapped_it = mapping.label_map.find(legacy_label);
      const std::string label = mapped_it != mapping.label_map.end() ? mapped_it->second : legacy_label;
      if (!allowed.empty() && !allowed.contains(label)) {
        if (mapping.strict) throw Error(Errc::UnknownLegacyLabel, where + ": '" + legacy_label + "'");
        ++result.unknown_labels;
        result.warnings.push_back("unknown legacy label '" + legacy_label + "' at " + where);
        continue;
      }
      seen_classes.insert(label);

      Annotation a;
      a.label = label;
      a.position_ms = *position;
      for (auto it = raw.begin(); it != raw.end(); ++it) {
        if (it.key() == mapping.label_field || it.key() == mapping.position_field ||
            it.key() == mapping.game_time_field || (mapping.half_field && it.key() == *mapping.half_field)) {
          continue;
        }
        a.metadata[it.key()] = it.value();
      }
      if (game_time) a.metadata["game_time"] = game_time->clock;
      if (legacy_label != label) a.metadata["legacy_label"] = legacy_label;
      per_half[*half].push_back(std::move(a));
    }

    if (ann_it->empty()) result.warnings.push_back("match '" + match + "' has no annotations");

    for (auto& [half, annotations] : per_half) {
      std::stable_sort(annotations.begin(), annotations.end(),
                       [](const Annotation& x, const Annotation& y) { return x.position_ms < y.position_ms; });
      VideoEntry v;
      v.path = substitute(mapping.video_pattern, match, half);
      if (mapping.features_pattern) v.features_path = substitute(*mapping.features_pattern, match, half);
      v.duration_ms = mapping.half_duration_ms;
      for (const auto& a : annotations) v.duration_ms = std::max(v.duration_ms, a.position_ms);
      v.fps = mapping.fps;
      auto split_it = mapping.splits.find(match);
      v.split = split_it != mapping.splits.end() ? split_it->second : mapping.default_split;
      v.annotations = std::move(annotations);
      v.metadata["match"] = match;
      v.metadata["half"] = half;
      videos.push_back(std::move(v));
    }
  }

  DatasetManifest& m = result.manifest;
  m.dataset_name = mapping.dataset_name;
  m.classes = mapping.classes.empty() ? std::vector<std::string>(seen_classes.begin(), seen_classes.end())
                                      : mapping.classes;
  m.videos = std::move(videos);
  m.metadata["source_label_file"] = mapping.label_file_name;
  return result;
}

}  // namespace spotkit
