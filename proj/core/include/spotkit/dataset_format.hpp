// SPDX-License-Identifier: Apache-2.0
//
// Single-file JSON dataset manifest: class vocabulary, video entries and
// their timestamped annotations. Ground-truth and prediction manifests share
// the schema; predictions carry a confidence on every annotation.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace spotkit {

inline constexpr std::string_view kManifestFormatVersion = "1.0";

enum class Split { train, valid, test, challenge };

std::string_view to_string(Split split);
std::optional<Split> split_from_string(std::string_view name);

struct Annotation {
  std::string label;
  std::int64_t position_ms = 0;
  std::optional<double> confidence;
  nlohmann::json metadata = nlohmann::json::object();

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct VideoEntry {
  std::optional<std::string> path;
  std::optional<std::string> features_path;
  std::int64_t duration_ms = 0;
  double fps = 25.0;
  Split split = Split::train;
  std::vector<Annotation> annotations;
  nlohmann::json metadata = nlohmann::json::object();

  /// Identifier used to pair predictions with ground truth: the video path,
  /// or the features path when no video path is recorded.
  const std::string& id() const;

  friend bool operator==(const VideoEntry&, const VideoEntry&) = default;
};

struct DatasetManifest {
  std::string format_version{kManifestFormatVersion};
  std::string dataset_name;
  std::vector<std::string> classes;
  std::vector<VideoEntry> videos;
  nlohmann::json metadata = nlohmann::json::object();

  std::optional<std::size_t> class_index(std::string_view name) const;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

// Stable codes emitted by validate_manifest.
namespace codes {
inline constexpr std::string_view kEmptyClassName = "EMPTY_CLASS_NAME";
inline constexpr std::string_view kDuplicateClass = "DUPLICATE_CLASS";
inline constexpr std::string_view kUnknownLabel = "UNKNOWN_LABEL";
inline constexpr std::string_view kDuplicateVideo = "DUPLICATE_VIDEO";
inline constexpr std::string_view kMissingMedia = "MISSING_MEDIA";
inline constexpr std::string_view kNonPositiveDuration = "NON_POSITIVE_DURATION";
inline constexpr std::string_view kNonPositiveFps = "NON_POSITIVE_FPS";
inline constexpr std::string_view kNegativePosition = "NEGATIVE_POSITION";
inline constexpr std::string_view kPositionOutOfRange = "POSITION_OUT_OF_RANGE";
inline constexpr std::string_view kConfidenceOutOfRange = "CONFIDENCE_OUT_OF_RANGE";
inline constexpr std::string_view kMissingConfidence = "MISSING_CONFIDENCE";
inline constexpr std::string_view kMissingFile = "MISSING_FILE";
inline constexpr std::string_view kUnknownVersion = "UNKNOWN_VERSION";
}  // namespace codes

struct ValidationIssue {
  std::string code;
  std::string location;  // JSON-pointer-like, e.g. /videos/3/annotations/0
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> errors;
  std::vector<ValidationIssue> warnings;

  bool is_valid() const { return errors.empty(); }
  bool has_error(std::string_view code) const;
  bool has_warning(std::string_view code) const;
};

struct ValidateOptions {
  bool strict = true;
  /// Require a confidence on every annotation (prediction manifests).
  bool require_confidence = false;
  /// When set, referenced media files are checked for existence under this root.
  std::optional<std::filesystem::path> media_root;
};

struct ParseOptions {
  bool strict = true;
};

/// Parses manifest text. Unknown top-level keys are folded into `metadata`.
/// Throws Error{MalformedDocument | SchemaViolation | UnknownVersion}.
DatasetManifest parse_manifest(std::string_view text, ParseOptions options = {});

ValidationReport validate_manifest(const DatasetManifest& manifest, const ValidateOptions& options);
inline ValidationReport validate_manifest(const DatasetManifest& manifest, bool strict) {
  ValidateOptions options;
  options.strict = strict;
  return validate_manifest(manifest, options);
}

/// Deterministic serialization (fixed key order, UTF-8, 2-space indent).
/// Throws Error{InvalidManifest} when strict validation fails.
std::string serialize_manifest(const DatasetManifest& manifest);

DatasetManifest filter_split(const DatasetManifest& manifest, Split split);

DatasetManifest load_manifest(const std::filesystem::path& path, ParseOptions options = {});
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Legacy per-match label trees (one label JSON per match folder).

struct LegacyMappingConfig {
  std::string label_file_name = "Labels-v2.json";
  std::string annotations_field = "annotations";
  std::string label_field = "label";
  std::string game_time_field = "gameTime";
  std::string position_field = "position";
  /// Optional explicit half field; otherwise the half is read from the
  /// "<half> - MM:SS" prefix of the game-time string.
  std::optional<std::string> half_field;
  std::vector<int> halves{1, 2};
  /// `{match}` and `{half}` are substituted.
  std::string video_pattern = "{match}/{half}_224p.mkv";
  std::optional<std::string> features_pattern;
  double fps = 25.0;
  std::int64_t half_duration_ms = 45 * 60 * 1000;
  std::string dataset_name = "legacy";
  /// Output vocabulary in order. Empty: sorted set of mapped labels found.
  std::vector<std::string> classes;
  /// Legacy label -> class name. Labels absent here map to themselves when
  /// `classes` is empty or contains them.
  std::map<std::string, std::string> label_map;
  /// Match folder (relative to root) -> split; unmatched folders use default_split.
  std::map<std::string, Split> splits;
  Split default_split = Split::train;
  /// When non-empty, only these match folders are read and each must exist.
  std::vector<std::string> matches;
  bool strict = true;
};

LegacyMappingConfig parse_legacy_mapping(const nlohmann::json& doc);

struct ConversionResult {
  DatasetManifest manifest;
  std::vector<std::string> warnings;
  std::size_t annotations_read = 0;
  std::size_t unknown_labels = 0;
};

/// Throws Error{MissingLabelFile | UnparseableGameTime | UnknownLegacyLabel | MalformedDocument}.
ConversionResult convert_legacy(const std::filesystem::path& root, const LegacyMappingConfig& mapping);

}  // namespace spotkit
