// SPDX-License-Identifier: Apache-2.0
//
// Context-aware segmentation and candidate spotting.
//
// The segmentation neck scores per-frame actionness for every class; its
// loss weighs each frame by where it sits relative to the nearest annotation
// (far before, ambiguous context, action, ambiguous context, far after).
// The spotting head regresses a fixed number of candidate spots per clip.

#pragma once

#include <limits>
#include <utility>
#include <vector>

#include "spotkit/models/layers.hpp"

namespace spotkit::models {

/// Signed frame-distance boundaries; d = t - annotation_row.
struct ZoneParams {
  double k1 = -40.0;
  double k2 = -10.0;
  double k3 = 10.0;
  double k4 = 40.0;

  /// Throws Error{InvalidZoneParams} unless k1 <= k2 <= 0 <= k3 <= k4.
  void validate() const;
  friend bool operator==(const ZoneParams&, const ZoneParams&) = default;
};

enum class Zone { far_before, context_before, action, context_after, far_after };

/// Zone of a frame at signed distance d from its nearest annotation.
Zone classify_zone(double d, const ZoneParams& zones);

/// Context loss over scores [T,C] in (0,1).
///
/// annotation_rows[c] holds the (fractional) row positions of class-c
/// annotations; a class without annotations treats every frame as far.
/// `zones` holds one entry per class or a single shared entry. Rows with
/// mask false are excluded from the mean.
nn::Var calf_context_loss(const nn::Var& scores, const std::vector<std::vector<double>>& annotation_rows,
                          const std::vector<ZoneParams>& zones, const std::vector<bool>& mask = {});

struct CalfSegmentation {
  nn::Var scores;  // [T,C] logistic actionness
  nn::Var hidden;  // [T,H]
};

/// Two kernel-5 temporal convolutions to `hidden` channels, then a kernel-3
/// convolution to C logistic outputs.
class CalfSegmentationNeck {
 public:
  CalfSegmentationNeck(nn::ParamStore& store, std::int64_t feature_dim, std::int64_t hidden, std::int64_t num_classes,
                       Rng& rng);
  CalfSegmentation forward(const nn::Var& features, const std::vector<bool>& mask) const;

 private:
  TemporalConv conv1_, conv2_, seg_;
  std::int64_t feature_dim_;
};

struct CandidateSpot {
  double location = 0.0;  // normalized in [0,1]
  std::vector<double> class_scores;  // C+1 simplex
  double confidence = 0.0;
};

/// Differentiable candidate outputs for one clip.
struct CandidateOutputs {
  nn::Var location;      // [M,1] in [0,1]
  nn::Var confidence;    // [M,1] in [0,1]
  nn::Var class_probs;   // [M,C+1] row simplices

  std::vector<CandidateSpot> spots() const;
};

/// Kernel-3 convolution over concat(hidden, segmentation), flattened over the
/// clip and projected to M * (2 + C+1) outputs.
class CalfSpottingHead {
 public:
  CalfSpottingHead(nn::ParamStore& store, std::int64_t hidden, std::int64_t num_classes, std::int64_t clip_length,
                   std::int64_t candidates, Rng& rng);
  CandidateOutputs forward(const CalfSegmentation& seg) const;
  std::int64_t candidates() const { return candidates_; }

 private:
  TemporalConv conv_;
  Linear out_;
  std::int64_t num_classes_, clip_length_, candidates_;
};

struct SpotTarget {
  double location = 0.0;  // normalized in [0,1]
  std::size_t class_index = 0;
};

/// One-to-one greedy matching: repeatedly pair the closest unmatched
/// (target, candidate), ties to the lower target then lower candidate index.
/// Returns (target, candidate) pairs in matching order.
std::vector<std::pair<std::size_t, std::size_t>> match_candidates(const std::vector<double>& candidate_locations,
                                                                  const std::vector<SpotTarget>& targets);

/// (loc_weight * sum squared location error + sum class cross-entropy) over
/// matched pairs / max(#targets, 1), plus mean binary cross-entropy of
/// confidence against matched (1) / unmatched (0).
nn::Var calf_spotting_loss(const CandidateOutputs& candidates, const std::vector<SpotTarget>& targets,
                           double loc_weight = 1.0);

}  // namespace spotkit::models
