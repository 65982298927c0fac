// SPDX-License-Identifier: Apache-2.0
//
// End-to-end frame classifier: a compact strided 2-D convolutional trunk with
// temporal channel shifting between stages, followed by a gated recurrent
// layer and a per-frame softmax over C+1 classes.

#pragma once

#include <optional>
#include <vector>

#include "spotkit/models/layers.hpp"

namespace spotkit::models {

struct PtsOptions {
  std::vector<std::int64_t> widths{16, 32, 64};
  /// Fraction of input channels shifted each way in time before every stage.
  double shift_fraction = 0.125;
  std::int64_t gru_hidden = 32;
  bool bidirectional = true;
};

class PtsBackbone {
 public:
  PtsBackbone(nn::ParamStore& store, std::int64_t channels, const PtsOptions& options, Rng& rng);

  /// [T,H,W,C] frames -> [T, widths.back()] embeddings.
  nn::Var forward(const nn::Var& frames) const;
  std::int64_t output_dim() const { return stages_.back().out_dim(); }

 private:
  std::vector<Linear> stages_;
  std::int64_t channels_;
  double shift_fraction_;
};

/// Gated recurrent unit with PyTorch gate layout: input and hidden
/// projections are [*, 3H] blocks in (reset, update, new) order.
class Gru {
 public:
  Gru(nn::ParamStore& store, const std::string& prefix, std::int64_t input, std::int64_t hidden, Rng& rng);

  /// [T,input] -> [T,hidden]; `reverse` scans from the last row.
  nn::Var forward(const nn::Var& x, bool reverse = false) const;

  Linear input_proj;
  Linear hidden_proj;
  std::int64_t hidden = 0;
};

class PtsHead {
 public:
  PtsHead(nn::ParamStore& store, std::int64_t input, std::int64_t num_classes, const PtsOptions& options, Rng& rng);

  /// [T,D] -> [T,C+1] log-probabilities.
  nn::Var log_probs(const nn::Var& features) const;
  /// Row-simplex frame scores.
  nn::Var forward(const nn::Var& features) const { return nn::exp(log_probs(features)); }

  const Gru& forward_gru() const { return fwd_; }

 private:
  Gru fwd_;
  std::optional<Gru> bwd_;
  Linear out_;
};

/// Mean cross-entropy of log-probabilities [T,K] against one-hot targets
/// [T,K] over rows with mask true.
nn::Var frame_cross_entropy(const nn::Var& log_probs, const nn::Tensor& targets, const std::vector<bool>& mask);

}  // namespace spotkit::models
