// SPDX-License-Identifier: Apache-2.0
#include "spotkit/models/pts.hpp"

#include <cmath>

#include "spotkit/error.hpp"

namespace spotkit::models {

PtsBackbone::PtsBackbone(nn::ParamStore& store, std::int64_t channels, const PtsOptions& options, Rng& rng)
    : channels_(channels), shift_fraction_(options.shift_fraction) {
  if (options.widths.empty()) throw Error(Errc::InvalidArgument, "PTS trunk needs at least one stage");
  if (shift_fraction_ < 0.0 || shift_fraction_ > 0.5) throw Error(Errc::InvalidArgument, "shift fraction must be in [0, 0.5]");
  std::int64_t in = channels;
  for (std::size_t s = 0; s < options.widths.size(); ++s) {
    stages_.push_back(Linear::create(store, "trunk.stage" + std::to_string(s) + ".", 9 * in, options.widths[s], rng));
    in = options.widths[s];
  }
}

nn::Var PtsBackbone::forward(const nn::Var& frames) const {
  const auto& v = frames.value();
  if (v.rank() != 4 || v.dim(3) != channels_) {
    throw Error(Errc::ShapeMismatch, "trunk expects [T,H,W," + std::to_string(channels_) + "] frames, got " +
                                         nn::shape_string(v.shape));
  }
  nn::Var x = frames;
  for (const Linear& stage : stages_) {
    const auto t = x.value().dim(0), h = x.value().dim(1), w = x.value().dim(2), c = x.value().dim(3);
    const auto fold = static_cast<std::int64_t>(std::floor(static_cast<double>(c) * shift_fraction_));
    if (fold > 0) x = nn::temporal_shift(x, fold);
    nn::Var y = nn::relu(stage.forward(nn::im2col(x, 3, 2, 1)));
    x = nn::reshape(y, {t, (h + 1) / 2, (w + 1) / 2, stage.out_dim()});
  }
  return nn::mean_spatial(x);
}

Gru::Gru(nn::ParamStore& store, const std::string& prefix, std::int64_t input, std::int64_t hidden_size, Rng& rng)
    : input_proj(Linear::create(store, prefix + "input.", input, 3 * hidden_size, rng)),
      hidden_proj(Linear::create(store, prefix + "hidden.", hidden_size, 3 * hidden_size, rng)),
      hidden(hidden_size) {}

nn::Var Gru::forward(const nn::Var& x, bool reverse) const {
  const auto t_len = x.value().rows();
  const nn::Var projected = input_proj.forward(x);  // [T,3H]
  nn::Var h = nn::constant(nn::Tensor({1, hidden}, 0.0));
  std::vector<nn::Var> outputs(static_cast<std::size_t>(t_len));
  for (std::int64_t step = 0; step < t_len; ++step) {
    const auto t = reverse ? t_len - 1 - step : step;
    const nn::Var xi = nn::slice_rows(projected, t, 1);
    const nn::Var hh = hidden_proj.forward(h);
    const nn::Var r = nn::sigmoid(nn::add(nn::slice_cols(xi, 0, hidden), nn::slice_cols(hh, 0, hidden)));
    const nn::Var z = nn::sigmoid(nn::add(nn::slice_cols(xi, hidden, hidden), nn::slice_cols(hh, hidden, hidden)));
    const nn::Var n = nn::tanh(nn::add(nn::slice_cols(xi, 2 * hidden, hidden), nn::mul(r, nn::slice_cols(hh, 2 * hidden, hidden))));
    h = nn::add(nn::mul(nn::one_minus(z), n), nn::mul(z, h));
    outputs[static_cast<std::size_t>(t)] = h;
  }
  return nn::concat_rows(outputs);
}

PtsHead::PtsHead(nn::ParamStore& store, std::int64_t input, std::int64_t num_classes, const PtsOptions& options, Rng& rng)
    : fwd_(store, "head.gru_fwd.", input, options.gru_hidden, rng),
      out_(Linear::create(store, "head.out.", (options.bidirectional ? 2 : 1) * options.gru_hidden, num_classes + 1, rng)) {
  if (options.bidirectional) bwd_.emplace(store, "head.gru_bwd.", input, options.gru_hidden, rng);
}

nn::Var PtsHead::log_probs(const nn::Var& features) const {
  if (features.value().rank() != 2 || features.value().cols() != fwd_.input_proj.in_dim()) {
    throw Error(Errc::ShapeMismatch, "recurrent head expects [T," + std::to_string(fwd_.input_proj.in_dim()) + "]");
  }
  nn::Var h = fwd_.forward(features);
  if (bwd_) {
    const nn::Var parts[] = {h, bwd_->forward(features, true)};
    h = nn::concat_cols(parts);
  }
  return nn::log_softmax_rows(out_.forward(h));
}

nn::Var frame_cross_entropy(const nn::Var& log_probs, const nn::Tensor& targets, const std::vector<bool>& mask) {
  if (log_probs.shape() != targets.shape || static_cast<std::int64_t>(mask.size()) != targets.rows()) {
    throw Error(Errc::ShapeMismatch, "frame targets do not match scores");
  }
  nn::Tensor weights = targets;
  std::int64_t active = 0;
  for (std::int64_t t = 0; t < targets.rows(); ++t) {
    if (mask[t]) {
      ++active;
      continue;
    }
    for (std::int64_t k = 0; k < targets.cols(); ++k) weights(t, k) = 0.0;
  }
  if (active == 0) throw Error(Errc::AllMasked, "frame loss over a fully masked clip");
  return nn::scale(nn::sum(nn::mul(nn::constant(std::move(weights)), log_probs)), -1.0 / static_cast<double>(active));
}

}  // namespace spotkit::models
