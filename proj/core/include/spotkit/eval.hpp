// SPDX-License-Identifier: Apache-2.0
//
// Spot extraction (thresholding + temporal NMS) and tolerance-based average
// precision. All time arithmetic is in integer milliseconds.

#pragma once

#include <cstdint>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spotkit/dataset_format.hpp"
#include "spotkit/models/model.hpp"

namespace spotkit {

struct SpotPrediction {
  std::string video_id;
  std::string label;
  std::int64_t position_ms = 0;
  double confidence = 0.0;

  friend bool operator==(const SpotPrediction&, const SpotPrediction&) = default;
};

/// Per class: keep timeline points with score >= threshold, then repeatedly
/// emit the best remaining point (ties: earlier) and drop every point closer
/// than nms_window_ms to it. Output is ordered by class, then position.
/// Scores beyond the first class_names.size() columns (background) are ignored.
std::vector<SpotPrediction> extract_spots(const models::ScoreTimeline& timeline,
                                          const std::vector<std::string>& class_names, const std::string& video_id,
                                          double threshold, std::int64_t nms_window_ms);

struct Detection {
  std::string video_id;
  std::int64_t position_ms = 0;
  double confidence = 0.0;
};

struct GroundTruth {
  std::string video_id;
  std::int64_t position_ms = 0;
};

/// Tolerance in seconds to the integer-millisecond matching radius.
/// Throws Error{NonPositiveTolerance}.
std::int64_t tolerance_ms(double tolerance_s);

/// Single-class AP pooled over videos. Predictions are ranked by confidence
/// (ties: earlier position, then input order); each takes the closest
/// unmatched ground truth of its video within the tolerance (inclusive; ties:
/// earlier ground truth). AP is the area under the all-point interpolated
/// precision/recall curve. nullopt when both sets are empty; 0 when only the
/// ground truth is empty. `matched` receives the number of true positives.
std::optional<double> average_precision(std::span<const Detection> predictions, std::span<const GroundTruth> truth,
                                        double tolerance_s, std::size_t* matched = nullptr);

struct ClassEvalData {
  std::vector<Detection> predictions;
  std::vector<GroundTruth> truth;
};

struct MapResult {
  std::vector<double> tolerances;
  std::vector<double> map_per_tolerance;
  double average = 0.0;
};

/// mAP per tolerance over classes with at least one ground truth (0 when no
/// class has any), and their unweighted mean.
MapResult average_map(std::span<const ClassEvalData> classes, std::span<const double> tolerances);

/// {5, 10, ..., 60} seconds.
std::vector<double> loose_tolerances();
/// {1, 2, 3, 4, 5} seconds.
std::vector<double> tight_tolerances();

struct EvalCounts {
  std::size_t predictions = 0;
  std::size_t ground_truths = 0;
  std::map<double, std::size_t> matched;  // per tolerance, summed over classes
};

struct EvalReport {
  std::vector<std::string> classes;  // table row order
  std::map<std::string, std::map<double, double>> per_class_ap;
  std::map<double, double> map_per_tolerance;
  double average_map_loose = 0.0;
  double average_map_tight = 0.0;
  EvalCounts counts;
};

struct EvalOptions {
  /// Evaluated in addition to the loose and tight grids.
  std::vector<double> extra_tolerances;
};

/// Scores a prediction manifest against ground truth. Missing prediction
/// confidences count as 1. Throws Error{VocabularyMismatch} when the class
/// sets differ or a prediction uses an unknown label, and
/// Error{UnknownVideoInPredictions} for videos absent from the ground truth.
EvalReport evaluate(const DatasetManifest& predictions, const DatasetManifest& ground_truth,
                    const EvalOptions& options = {});

std::string tolerance_key(double tolerance_s);
nlohmann::ordered_json report_to_json(const EvalReport& report);
/// Classes x tolerances AP table followed by mAP and the two averages.
std::string format_report_table(const EvalReport& report, std::span<const double> tolerances);

}  // namespace spotkit
