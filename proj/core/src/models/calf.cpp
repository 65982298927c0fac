// SPDX-License-Identifier: Apache-2.0
#include "spotkit/models/calf.hpp"

#include <algorithm>
#include <cmath>

#include "spotkit/error.hpp"

namespace spotkit::models {

void ZoneParams::validate() const {
  if (std::isnan(k1) || std::isnan(k2) || std::isnan(k3) || std::isnan(k4) || !(k1 <= k2 && k2 <= 0.0 && 0.0 <= k3 && k3 <= k4)) {
    throw Error(Errc::InvalidZoneParams, "zone boundaries must satisfy K1 <= K2 <= 0 <= K3 <= K4");
  }
}

Zone classify_zone(double d, const ZoneParams& z) {
  if (d < z.k1) return Zone::far_before;
  if (d < z.k2) return Zone::context_before;
  if (d <= z.k3) return Zone::action;
  if (d <= z.k4) return Zone::context_after;
  return Zone::far_after;
}

nn::Var calf_context_loss(const nn::Var& scores, const std::vector<std::vector<double>>& annotation_rows,
                          const std::vector<ZoneParams>& zones, const std::vector<bool>& mask) {
  const auto& s = scores.value();
  if (s.rank() != 2) throw Error(Errc::ShapeMismatch, "context loss expects [T,C] scores");
  const auto t_len = s.rows(), classes = s.cols();
  if (static_cast<std::int64_t>(annotation_rows.size()) != classes) {
    throw Error(Errc::ShapeMismatch, "annotation rows must be given per class");
  }
  if (zones.size() != 1 && static_cast<std::int64_t>(zones.size()) != classes) {
    throw Error(Errc::InvalidZoneParams, "zone parameters must be shared or given per class");
  }
  for (const auto& z : zones) z.validate();
  if (!mask.empty() && static_cast<std::int64_t>(mask.size()) != t_len) {
    throw Error(Errc::ShapeMismatch, "mask length differs from score rows");
  }

  nn::Tensor positive({t_len, classes}, 0.0), negative({t_len, classes}, 0.0);
  std::int64_t active = 0;
  for (std::int64_t t = 0; t < t_len; ++t) {
    if (!mask.empty() && !mask[t]) continue;
    ++active;
    for (std::int64_t c = 0; c < classes; ++c) {
      const ZoneParams& z = zones.size() == 1 ? zones[0] : zones[c];
      const auto& rows = annotation_rows[c];
      if (rows.empty()) {
        negative(t, c) = 1.0;
        continue;
      }
      // Nearest annotation; ties go to the earlier one.
      double best = rows.front();
      for (double a : rows) {
        const double da = std::abs(static_cast<double>(t) - a), db = std::abs(static_cast<double>(t) - best);
        if (da < db || (da == db && a < best)) best = a;
      }
      switch (classify_zone(static_cast<double>(t) - best, z)) {
        case Zone::action: positive(t, c) = 1.0; break;
        case Zone::far_before:
        case Zone::far_after: negative(t, c) = 1.0; break;
        default: break;
      }
    }
  }
  if (active == 0) throw Error(Errc::AllMasked, "context loss over a fully masked clip");
  nn::Var pos_term = nn::sum(nn::mul(nn::constant(std::move(positive)), nn::log(scores)));
  nn::Var neg_term = nn::sum(nn::mul(nn::constant(std::move(negative)), nn::log(nn::one_minus(scores))));
  return nn::scale(nn::add(pos_term, neg_term), -1.0 / static_cast<double>(active * classes));
}

CalfSegmentationNeck::CalfSegmentationNeck(nn::ParamStore& store, std::int64_t feature_dim, std::int64_t hidden,
                                           std::int64_t num_classes, Rng& rng)
    : conv1_(TemporalConv::create(store, "seg.conv1.", 5, feature_dim, hidden, rng)),
      conv2_(TemporalConv::create(store, "seg.conv2.", 5, hidden, hidden, rng)),
      seg_(TemporalConv::create(store, "seg.out.", 3, hidden, num_classes, rng)),
      feature_dim_(feature_dim) {}

CalfSegmentation CalfSegmentationNeck::forward(const nn::Var& features, const std::vector<bool>& mask) const {
  const auto& f = features.value();
  if (f.rank() != 2 || f.cols() != feature_dim_ || static_cast<std::int64_t>(mask.size()) != f.rows()) {
    throw Error(Errc::ShapeMismatch, "segmentation neck expects [T," + std::to_string(feature_dim_) + "] and a T-long mask");
  }
  nn::Tensor m({f.rows(), 1});
  for (std::size_t i = 0; i < mask.size(); ++i) m.data[i] = mask[i] ? 1.0 : 0.0;
  const nn::Var keep = nn::constant(std::move(m));
  nn::Var h = nn::mul_col(nn::relu(conv1_.forward(features)), keep);
  h = nn::mul_col(nn::relu(conv2_.forward(h)), keep);
  return {nn::sigmoid(seg_.forward(h)), h};
}

std::vector<CandidateSpot> CandidateOutputs::spots() const {
  const auto m = location.value().rows();
  const auto k = class_probs.value().cols();
  std::vector<CandidateSpot> out(static_cast<std::size_t>(m));
  for (std::int64_t i = 0; i < m; ++i) {
    out[i].location = location.value().data[i];
    out[i].confidence = confidence.value().data[i];
    out[i].class_scores.assign(class_probs.value().data.begin() + i * k, class_probs.value().data.begin() + (i + 1) * k);
  }
  return out;
}

CalfSpottingHead::CalfSpottingHead(nn::ParamStore& store, std::int64_t hidden, std::int64_t num_classes,
                                   std::int64_t clip_length, std::int64_t candidates, Rng& rng)
    : conv_(TemporalConv::create(store, "spot.conv.", 3, hidden + num_classes, hidden, rng)),
      out_(Linear::create(store, "spot.out.", clip_length * hidden, candidates * (num_classes + 3), rng)),
      num_classes_(num_classes),
      clip_length_(clip_length),
      candidates_(candidates) {
  if (candidates < 1) throw Error(Errc::InvalidArgument, "candidate count must be >= 1");
  // Spread initial locations evenly over the clip.
  nn::Tensor& bias = out_.bias.mutable_value();
  for (std::int64_t m = 0; m < candidates; ++m) {
    const double p = (static_cast<double>(m) + 0.5) / static_cast<double>(candidates);
    bias.data[m * (num_classes + 3)] = std::log(p / (1.0 - p));
  }
}

CandidateOutputs CalfSpottingHead::forward(const CalfSegmentation& seg) const {
  const nn::Var parts[] = {seg.hidden, seg.scores};
  nn::Var x = nn::relu(conv_.forward(nn::concat_cols(parts)));
  if (x.value().rows() != clip_length_) {
    throw Error(Errc::ShapeMismatch, "spotting head built for clips of " + std::to_string(clip_length_) + " rows");
  }
  nn::Var flat = nn::reshape(x, {1, x.value().size()});
  nn::Var raw = nn::reshape(out_.forward(flat), {candidates_, num_classes_ + 3});
  CandidateOutputs out;
  out.location = nn::sigmoid(nn::slice_cols(raw, 0, 1));
  out.confidence = nn::sigmoid(nn::slice_cols(raw, 1, 1));
  out.class_probs = nn::softmax_rows(nn::slice_cols(raw, 2, num_classes_ + 1));
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> match_candidates(const std::vector<double>& candidate_locations,
                                                                  const std::vector<SpotTarget>& targets) {
  struct Pair {
    double distance;
    std::size_t target, candidate;
  };
  std::vector<Pair> pairs;
  pairs.reserve(candidate_locations.size() * targets.size());
  for (std::size_t g = 0; g < targets.size(); ++g) {
    for (std::size_t m = 0; m < candidate_locations.size(); ++m) {
      pairs.push_back({std::abs(candidate_locations[m] - targets[g].location), g, m});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    if (a.target != b.target) return a.target < b.target;
    return a.candidate < b.candidate;
  });
  std::vector<bool> target_used(targets.size(), false), candidate_used(candidate_locations.size(), false);
  std::vector<std::pair<std::size_t, std::size_t>> matches;
  for (const Pair& p : pairs) {
    if (target_used[p.target] || candidate_used[p.candidate]) continue;
    target_used[p.target] = candidate_used[p.candidate] = true;
    matches.emplace_back(p.target, p.candidate);
  }
  return matches;
}

nn::Var calf_spotting_loss(const CandidateOutputs& candidates, const std::vector<SpotTarget>& targets,
                           double loc_weight) {
  const auto m = candidates.location.value().rows();
  const auto k = candidates.class_probs.value().cols();
  if (candidates.confidence.value().rows() != m || candidates.class_probs.value().rows() != m) {
    throw Error(Errc::ShapeMismatch, "candidate outputs disagree on M");
  }
  for (const auto& t : targets) {
    if (static_cast<std::int64_t>(t.class_index) >= k - 1) throw Error(Errc::ShapeMismatch, "target class out of range");
  }
  const auto matches = match_candidates(candidates.location.value().data, targets);

  nn::Tensor loc_target({m, 1}, 0.0), loc_select({m, 1}, 0.0), class_select({m, k}, 0.0), matched({m, 1}, 0.0);
  for (const auto& [g, c] : matches) {
    loc_target.data[c] = targets[g].location;
    loc_select.data[c] = 1.0;
    class_select(static_cast<std::int64_t>(c), static_cast<std::int64_t>(targets[g].class_index)) = 1.0;
    matched.data[c] = 1.0;
  }
  const double norm = 1.0 / static_cast<double>(std::max<std::size_t>(targets.size(), 1));
  nn::Var loc_err = nn::mul(nn::constant(loc_select), nn::square(nn::sub(candidates.location, nn::constant(loc_target))));
  nn::Var class_ce = nn::scale(nn::sum(nn::mul(nn::constant(class_select), nn::log(candidates.class_probs))), -1.0);
  nn::Var matched_term = nn::scale(nn::add(nn::scale(nn::sum(loc_err), loc_weight), class_ce), norm);

  nn::Tensor unmatched = matched;
  for (double& v : unmatched.data) v = 1.0 - v;
  nn::Var bce = nn::add(nn::sum(nn::mul(nn::constant(matched), nn::log(candidates.confidence))),
                        nn::sum(nn::mul(nn::constant(std::move(unmatched)), nn::log(nn::one_minus(candidates.confidence)))));
  return nn::add(matched_term, nn::scale(bce, -1.0 / static_cast<double>(m)));
}

}  // namespace spotkit::models
