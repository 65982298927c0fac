// SPDX-License-Identifier: Apache-2.0
#include "spotkit/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include "spotkit/error.hpp"

namespace spotkit {

std::vector<SpotPrediction> extract_spots(const models::ScoreTimeline& timeline,
                                          const std::vector<std::string>& class_names, const std::string& video_id,
                                          double threshold, std::int64_t nms_window_ms) {
  if (nms_window_ms < 0) throw Error(Errc::InvalidArgument, "NMS window must be >= 0");
  std::vector<SpotPrediction> out;
  const auto rows = static_cast<std::int64_t>(timeline.timestamps_ms.size());
  if (rows == 0) return out;
  if (timeline.scores.rank() != 2 || timeline.scores.rows() != rows ||
      timeline.scores.cols() < static_cast<std::int64_t>(class_names.size())) {
    throw Error(Errc::ShapeMismatch, "score timeline does not cover every class");
  }
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    std::vector<std::int64_t> candidates;
    for (std::int64_t r = 0; r < rows; ++r) {
      if (timeline.scores(r, static_cast<std::int64_t>(c)) >= threshold) candidates.push_back(r);
    }
    std::stable_sort(candidates.begin(), candidates.end(), [&](std::int64_t a, std::int64_t b) {
      const double sa = timeline.scores(a, static_cast<std::int64_t>(c)), sb = timeline.scores(b, static_cast<std::int64_t>(c));
      if (sa != sb) return sa > sb;
      return timeline.timestamps_ms[a] < timeline.timestamps_ms[b];
    });
    std::vector<SpotPrediction> kept;
    std::vector<bool> suppressed(candidates.size(), false);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (suppressed[i]) continue;
      const auto t = timeline.timestamps_ms[candidates[i]];
      kept.push_back({video_id, class_names[c], t, timeline.scores(candidates[i], static_cast<std::int64_t>(c))});
      for (std::size_t j = i + 1; j < candidates.size(); ++j) {
        if (std::abs(timeline.timestamps_ms[candidates[j]] - t) < nms_window_ms) suppressed[j] = true;
      }
    }
    std::stable_sort(kept.begin(), kept.end(),
                     [](const SpotPrediction& a, const SpotPrediction& b) { return a.position_ms < b.position_ms; });
    out.insert(out.end(), kept.begin(), kept.end());
  }
  return out;
}

std::int64_t tolerance_ms(double tolerance_s) {
  if (!(tolerance_s > 0.0) || !std::isfinite(tolerance_s)) {
    throw Error(Errc::NonPositiveTolerance, "tolerance must be a positive number of seconds");
  }
  return std::llround(tolerance_s * 1000.0);
}

std::optional<double> average_precision(std::span<const Detection> predictions, std::span<const GroundTruth> truth,
                                        double tolerance_s, std::size_t* matched) {
  const std::int64_t radius = tolerance_ms(tolerance_s);
  if (matched) *matched = 0;
  if (truth.empty()) return predictions.empty() ? std::nullopt : std::optional<double>(0.0);

  std::vector<std::size_t> order(predictions.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (predictions[a].confidence != predictions[b].confidence) return predictions[a].confidence > predictions[b].confidence;
    return predictions[a].position_ms < predictions[b].position_ms;
  });

  std::unordered_map<std::string, std::vector<std::size_t>> by_video;
  for (std::size_t g = 0; g < truth.size(); ++g) by_video[truth[g].video_id].push_back(g);
  std::vector<bool> used(truth.size(), false);

  std::vector<double> precision, recall;
  std::size_t tp = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const Detection& p = predictions[order[k]];
    std::optional<std::size_t> best;
    if (auto it = by_video.find(p.video_id); it != by_video.end()) {
      for (std::size_t g : it->second) {
        if (used[g]) continue;
        const auto d = std::abs(truth[g].position_ms - p.position_ms);
        if (d > radius) continue;
        if (!best) {
          best = g;
          continue;
        }
        const auto db = std::abs(truth[*best].position_ms - p.position_ms);
        if (d < db || (d == db && truth[g].position_ms < truth[*best].position_ms)) best = g;
      }
    }
    if (best) {
      used[*best] = true;
      ++tp;
    }
    precision.push_back(static_cast<double>(tp) / static_cast<double>(k + 1));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(truth.size()));
  }
  if (matched) *matched = tp;

  // Right-to-left running max gives the interpolated precision envelope.
  for (std::size_t k = precision.size(); k-- > 1;) precision[k - 1] = std::max(precision[k - 1], precision[k]);
  double ap = 0.0, previous_recall = 0.0;
  for (std::size_t k = 0; k < precision.size(); ++k) {
    ap += (recall[k] - previous_recall) * precision[k];
    previous_recall = recall[k];
  }
  return ap;
}

MapResult average_map(std::span<const ClassEvalData> classes, std::span<const double> tolerances) {
  if (tolerances.empty()) throw Error(Errc::NonPositiveTolerance, "tolerance list is empty");
  for (double tol : tolerances) tolerance_ms(tol);
  MapResult result;
  for (double tol : tolerances) {
    double total = 0.0;
    std::size_t scored = 0;
    for (const auto& cls : classes) {
      if (cls.truth.empty()) continue;
      total += *average_precision(cls.predictions, cls.truth, tol);
      ++scored;
    }
    result.tolerances.push_back(tol);
    result.map_per_tolerance.push_back(scored ? total / static_cast<double>(scored) : 0.0);
  }
  result.average = std::accumulate(result.map_per_tolerance.begin(), result.map_per_tolerance.end(), 0.0) /
                   static_cast<double>(result.map_per_tolerance.size());
  return result;
}

std::vector<double> loose_tolerances() {
  std::vector<double> out;
  for (int s = 5; s <= 60; s += 5) out.push_back(s);
  return out;
}

std::vector<double> tight_tolerances() { return {1, 2, 3, 4, 5}; }

EvalReport evaluate(const DatasetManifest& predictions, const DatasetManifest& ground_truth, const EvalOptions& options) {
  const std::set<std::string> pred_vocab(predictions.classes.begin(), predictions.classes.end());
  const std::set<std::string> gt_vocab(ground_truth.classes.begin(), ground_truth.classes.end());
  if (pred_vocab != gt_vocab) throw Error(Errc::VocabularyMismatch, "prediction and ground-truth class sets differ");

  std::set<std::string> gt_videos;
  for (const auto& v : ground_truth.videos) gt_videos.insert(v.id());

  const std::size_t classes = ground_truth.classes.size();
  std::vector<ClassEvalData> data(classes);
  EvalReport report;
  report.classes = ground_truth.classes;
  for (const auto& v : ground_truth.videos) {
    for (const auto& a : v.annotations) {
      auto idx = ground_truth.class_index(a.label);
      if (!idx) throw Error(Errc::VocabularyMismatch, "ground truth uses unknown label '" + a.label + "'");
      data[*idx].truth.push_back({v.id(), a.position_ms});
      ++report.counts.ground_truths;
    }
  }
  for (const auto& v : predictions.videos) {
    if (!gt_videos.contains(v.id())) {
      throw Error(Errc::UnknownVideoInPredictions, "video '" + v.id() + "' is not in the ground truth");
    }
    for (const auto& a : v.annotations) {
      auto idx = ground_truth.class_index(a.label);
      if (!idx) throw Error(Errc::VocabularyMismatch, "prediction uses unknown label '" + a.label + "'");
      data[*idx].predictions.push_back({v.id(), a.position_ms, a.confidence.value_or(1.0)});
      ++report.counts.predictions;
    }
  }

  std::vector<double> all = loose_tolerances();
  for (double t : tight_tolerances()) all.push_back(t);
  for (double t : options.extra_tolerances) all.push_back(t);
  std::set<double> unique(all.begin(), all.end());
  for (double tol : unique) tolerance_ms(tol);
  for (double tol : unique) {
    double total = 0.0;
    std::size_t scored = 0, matched_total = 0;
    for (std::size_t c = 0; c < classes; ++c) {
      if (data[c].truth.empty()) continue;
      std::size_t matched = 0;
      const double ap = *average_precision(data[c].predictions, data[c].truth, tol, &matched);
      report.per_class_ap[ground_truth.classes[c]][tol] = ap;
      total += ap;
      ++scored;
      matched_total += matched;
    }
    report.map_per_tolerance[tol] = scored ? total / static_cast<double>(scored) : 0.0;
    report.counts.matched[tol] = matched_total;
  }
  auto grid_mean = [&](const std::vector<double>& grid) {
    double s = 0.0;
    for (double t : grid) s += report.map_per_tolerance.at(t);
    return s / static_cast<double>(grid.size());
  };
  report.average_map_loose = grid_mean(loose_tolerances());
  report.average_map_tight = grid_mean(tight_tolerances());
  return report;
}

std::string tolerance_key(double tolerance_s) {
  if (tolerance_s == std::floor(tolerance_s) && std::abs(tolerance_s) < 1e15) {
    return std::to_string(static_cast<long long>(tolerance_s));
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", tolerance_s);
  return buf;
}

nlohmann::ordered_json report_to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json per_class = nlohmann::ordered_json::object();
  for (const auto& name : report.classes) {
    auto it = report.per_class_ap.find(name);
    if (it == report.per_class_ap.end()) continue;
    nlohmann::ordered_json row = nlohmann::ordered_json::object();
    for (const auto& [tol, ap] : it->second) row[tolerance_key(tol)] = ap;
    per_class[name] = row;
  }
  j["per_class_ap"] = per_class;
  nlohmann::ordered_json maps = nlohmann::ordered_json::object();
  for (const auto& [tol, m] : report.map_per_tolerance) maps[tolerance_key(tol)] = m;
  j["map_per_tolerance"] = maps;
  j["average_map_loose"] = report.average_map_loose;
  j["average_map_tight"] = report.average_map_tight;
  nlohmann::ordered_json matched = nlohmann::ordered_json::object();
  for (const auto& [tol, n] : report.counts.matched) matched[tolerance_key(tol)] = n;
  j["counts"] = {{"predictions", report.counts.predictions},
                 {"ground_truths", report.counts.ground_truths},
                 {"matched", matched}};
  return j;
}

std::string format_report_table(const EvalReport& report, std::span<const double> tolerances) {
  std::size_t name_width = 5;
  for (const auto& c : report.classes) name_width = std::max(name_width, c.size());
  std::ostringstream out;
  char cell[32];
  auto pad = [&](const std::string& s) { return s + std::string(name_width - std::min(name_width, s.size()), ' '); };
  out << pad("class");
  for (double t : tolerances) {
    std::snprintf(cell, sizeof cell, " %7s", (tolerance_key(t) + "s").c_str());
    out << cell;
  }
  out << '\n';
  auto value = [&](const std::map<double, double>& row, double t) {
    auto it = row.find(t);
    if (it == row.end()) std::snprintf(cell, sizeof cell, " %7s", "-");
    else std::snprintf(cell, sizeof cell, " %7.4f", it->second);
    return std::string(cell);
  };
  const std::map<double, double> unscored;
  for (const auto& name : report.classes) {
    auto it = report.per_class_ap.find(name);
    out << pad(name);
    for (double t : tolerances) out << value(it == report.per_class_ap.end() ? unscored : it->second, t);
    out << '\n';
  }
  out << pad("mAP");
  for (double t : tolerances) out << value(report.map_per_tolerance, t);
  out << '\n';
  std::snprintf(cell, sizeof cell, "%.4f", report.average_map_loose);
  out << "average-mAP loose: " << cell << '\n';
  std::snprintf(cell, sizeof cell, "%.4f", report.average_map_tight);
  out << "average-mAP tight: " << cell << '\n';
  return out.str();
}

}  // namespace spotkit
