// SPDX-License-Identifier: Apache-2.0
#include "spotkit/models/model.hpp"

#include <algorithm>
#include <cmath>

#include "spotkit/error.hpp"

namespace spotkit::models {

using nlohmann::json;
using nlohmann::ordered_json;

nlohmann::ordered_json model_config_to_json(const ModelConfig& c) {
  ordered_json j;
  j["key"] = c.key;
  j["num_classes"] = c.num_classes;
  j["input_dim"] = c.input_dim;
  j["clip_length"] = c.clip_length;
  j["clusters"] = c.clusters;
  j["calf"] = {{"hidden", c.calf.hidden},
               {"candidates", c.calf.candidates},
               {"zones", {c.calf.zones.k1, c.calf.zones.k2, c.calf.zones.k3, c.calf.zones.k4}},
               {"loc_weight", c.calf.loc_weight},
               {"segmentation_weight", c.calf.segmentation_weight},
               {"spotting_weight", c.calf.spotting_weight}};
  j["pts"] = {{"widths", c.pts.widths},
              {"shift_fraction", c.pts.shift_fraction},
              {"gru_hidden", c.pts.gru_hidden},
              {"bidirectional", c.pts.bidirectional}};
  j["init_seed"] = c.init_seed;
  j["options"] = ordered_json::parse(c.options.dump());
  return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(Errc::ConfigError, "model config must be an object");
  ModelConfig c;
  try {
    c.key = j.value("key", c.key);
    c.num_classes = j.value("num_classes", c.num_classes);
    c.input_dim = j.value("input_dim", c.input_dim);
    c.clip_length = j.value("clip_length", c.clip_length);
    c.clusters = j.value("clusters", c.clusters);
    if (j.contains("calf")) {
      const json& k = j.at("calf");
      c.calf.hidden = k.value("hidden", c.calf.hidden);
      c.calf.candidates = k.value("candidates", c.calf.candidates);
      if (k.contains("zones")) {
        const auto z = k.at("zones").get<std::vector<double>>();
        if (z.size() != 4) throw Error(Errc::ConfigError, "calf.zones needs four boundaries");
        c.calf.zones = {z[0], z[1], z[2], z[3]};
      }
      c.calf.loc_weight = k.value("loc_weight", c.calf.loc_weight);
      c.calf.segmentation_weight = k.value("segmentation_weight", c.calf.segmentation_weight);
      c.calf.spotting_weight = k.value("spotting_weight", c.calf.spotting_weight);
    }
    if (j.contains("pts")) {
      const json& p = j.at("pts");
      c.pts.widths = p.value("widths", c.pts.widths);
      c.pts.shift_fraction = p.value("shift_fraction", c.pts.shift_fraction);
      c.pts.gru_hidden = p.value("gru_hidden", c.pts.gru_hidden);
      c.pts.bidirectional = p.value("bidirectional", c.pts.bidirectional);
    }
    c.init_seed = j.value("init_seed", c.init_seed);
    if (j.contains("options")) c.options = j.at("options");
  } catch (const json::exception& e) {
    throw Error(Errc::ConfigError, std::string("model config: ") + e.what());
  }
  if (c.num_classes < 1 || c.input_dim < 1 || c.clip_length < 1) {
    throw Error(Errc::ConfigError, "model config needs num_classes, input_dim and clip_length >= 1");
  }
  return c;
}

PoolingSpec parse_pool_key(const std::string& key, std::int64_t clusters) {
  if (!key.starts_with("pool:")) throw Error(Errc::ConfigError, "not a pooling key: '" + key + "'");
  std::string kind = key.substr(5);
  PoolingSpec spec;
  spec.clusters = clusters;
  if (kind.ends_with("++")) {
    spec.temporally_aware = true;
    kind.resize(kind.size() - 2);
  }
  if (kind == "max") spec.kind = PoolKind::max;
  else if (kind == "avg") spec.kind = PoolKind::avg;
  else if (kind == "netvlad") spec.kind = PoolKind::netvlad;
  else if (kind == "netrvlad") spec.kind = PoolKind::netrvlad;
  else throw Error(Errc::ConfigError, "unknown pooling kind in '" + key + "'");
  if ((spec.kind == PoolKind::netvlad || spec.kind == PoolKind::netrvlad) && clusters < 1) {
    throw Error(Errc::ConfigError, "clusters must be >= 1");
  }
  return spec;
}

namespace {

bool unscorable(const Error& e) { return e.code() == Errc::EmptyHalf || e.code() == Errc::AllMasked; }

nn::Var mean_of(const std::vector<nn::Var>& losses) {
  nn::Var total = losses.front();
  for (std::size_t i = 1; i < losses.size(); ++i) total = nn::add(total, losses[i]);
  return nn::scale(total, 1.0 / static_cast<double>(losses.size()));
}

nn::Var skipped_loss() { return nn::constant(nn::Tensor({1, 1}, 0.0)); }

class PoolingModel final : public SpottingModel {
 public:
  explicit PoolingModel(const ModelConfig& config) : SpottingModel(config) {
    Rng rng(config.init_seed);
    PoolingSpec spec = parse_pool_key(config.key, config.clusters);
    spec.split_index = config.clip_length / 2;
    neck_.emplace(spec, config.input_dim, params_, rng);
    head_ = Linear::create(params_, "head.", neck_->output_dim(), config.num_classes + 1, rng);
  }

  OutputMode output_mode() const override { return OutputMode::clip; }
  Sampling default_sampling() const override { return Sampling::event_centered; }

  nn::Var batch_loss(const ClipBatch& batch) const override {
    std::vector<nn::Var> pooled;
    std::vector<const Clip*> used;
    for (const Clip& clip : batch.clips) {
      try {
        pooled.push_back(neck_->forward(nn::constant(clip.payload), clip.pad_mask));
        used.push_back(&clip);
      } catch (const Error& e) {
        if (!unscorable(e)) throw;
      }
    }
    if (pooled.empty()) return skipped_loss();
    const auto k = config_.num_classes + 1;
    nn::Tensor weights({static_cast<std::int64_t>(used.size()), k}, 0.0);
    double total = 0.0;
    for (std::size_t b = 0; b < used.size(); ++b) {
      const auto& counts = used[b]->targets.clip_classes;
      int n = 0;
      for (std::size_t c = 0; c < counts.size(); ++c) {
        weights(static_cast<std::int64_t>(b), static_cast<std::int64_t>(c)) = counts[c];
        n += counts[c];
      }
      if (n == 0) weights(static_cast<std::int64_t>(b), k - 1) = 1.0;
      total += std::max(n, 1);
    }
    nn::Var logp = nn::log_softmax_rows(head_.forward(nn::concat_rows(pooled)));
    return nn::scale(nn::sum(nn::mul(nn::constant(std::move(weights)), logp)), -1.0 / total);
  }

  nn::Tensor predict_window(const nn::Tensor& payload, const std::vector<bool>& mask) const override {
    nn::NoGradGuard guard;
    return classification_head(neck_->forward(nn::constant(payload), mask), head_).value();
  }

 private:
  std::optional<PoolingNeck> neck_;
  Linear head_;
};

class CalfModel final : public SpottingModel {
 public:
  explicit CalfModel(const ModelConfig& config)
      : SpottingModel(config),
        rng_(config.init_seed),
        neck_(params_, config.input_dim, config.calf.hidden, config.num_classes, rng_),
        head_(params_, config.calf.hidden, config.num_classes, config.clip_length, config.calf.candidates, rng_) {
    config.calf.zones.validate();
  }

  OutputMode output_mode() const override { return OutputMode::candidates; }
  TargetMode target_mode() const override { return TargetMode::frame_label; }

  nn::Var batch_loss(const ClipBatch& batch) const override {
    std::vector<nn::Var> losses;
    const auto classes = static_cast<std::size_t>(config_.num_classes);
    const double last_row = static_cast<double>(config_.clip_length - 1);
    for (const Clip& clip : batch.clips) {
      std::vector<std::vector<double>> rows(classes);
      std::vector<SpotTarget> targets;
      for (const LabeledEvent& e : clip.video_events) {
        if (e.class_index >= classes) continue;
        const double row = static_cast<double>(e.position_ms) * clip.rate_hz / 1000.0 - static_cast<double>(clip.origin);
        rows[e.class_index].push_back(row);
        if (row >= 0.0 && row <= last_row) targets.push_back({last_row > 0 ? row / last_row : 0.0, e.class_index});
      }
      try {
        const CalfSegmentation seg = neck_.forward(nn::constant(clip.payload), clip.pad_mask);
        nn::Var context = calf_context_loss(seg.scores, rows, {config_.calf.zones}, clip.pad_mask);
        nn::Var spotting = calf_spotting_loss(head_.forward(seg), targets, config_.calf.loc_weight);
        losses.push_back(nn::add(nn::scale(context, config_.calf.segmentation_weight),
                                 nn::scale(spotting, config_.calf.spotting_weight)));
      } catch (const Error& e) {
        if (!unscorable(e)) throw;
      }
    }
    if (losses.empty()) return skipped_loss();
    return mean_of(losses);
  }

  nn::Tensor predict_window(const nn::Tensor& payload, const std::vector<bool>& mask) const override {
    nn::NoGradGuard guard;
    const CandidateOutputs out = head_.forward(neck_.forward(nn::constant(payload), mask));
    const nn::Var parts[] = {out.location, out.confidence, out.class_probs};
    return nn::concat_cols(parts).value();
  }

 private:
  Rng rng_;
  CalfSegmentationNeck neck_;
  CalfSpottingHead head_;
};

class PtsModel final : public SpottingModel {
 public:
  explicit PtsModel(const ModelConfig& config)
      : SpottingModel(config),
        rng_(config.init_seed),
        trunk_(params_, config.input_dim, config.pts, rng_),
        head_(params_, trunk_.output_dim(), config.num_classes, config.pts, rng_) {}

  OutputMode output_mode() const override { return OutputMode::frame; }
  PayloadKind payload() const override { return PayloadKind::frames; }
  TargetMode target_mode() const override { return TargetMode::frame_label; }

  nn::Var batch_loss(const ClipBatch& batch) const override {
    std::vector<nn::Var> losses;
    for (const Clip& clip : batch.clips) {
      nn::Var logp = head_.log_probs(trunk_.forward(nn::constant(clip.payload)));
      try {
        losses.push_back(frame_cross_entropy(logp, clip.targets.frame_classes, clip.pad_mask));
      } catch (const Error& e) {
        if (!unscorable(e)) throw;
      }
    }
    if (losses.empty()) return skipped_loss();
    return mean_of(losses);
  }

  nn::Tensor predict_window(const nn::Tensor& payload, const std::vector<bool>&) const override {
    nn::NoGradGuard guard;
    return head_.forward(trunk_.forward(nn::constant(payload))).value();
  }

 private:
  Rng rng_;
  PtsBackbone trunk_;
  PtsHead head_;
};

}  // namespace

ModelRegistry& ModelRegistry::global() {
  static ModelRegistry registry = [] {
    ModelRegistry r;
    for (const char* kind : {"max", "avg", "netvlad", "netrvlad"}) {
      for (const char* suffix : {"", "++"}) {
        r.register_model(std::string("pool:") + kind + suffix,
                         [](const ModelConfig& c) { return std::make_unique<PoolingModel>(c); });
      }
    }
    r.register_model("calf", [](const ModelConfig& c) { return std::make_unique<CalfModel>(c); });
    r.register_model("pts", [](const ModelConfig& c) { return std::make_unique<PtsModel>(c); });
    return r;
  }();
  return registry;
}

void ModelRegistry::register_model(const std::string& key, ModelFactory factory) {
  factories_[key] = std::move(factory);
}

bool ModelRegistry::contains(const std::string& key) const { return factories_.contains(key); }

std::vector<std::string> ModelRegistry::keys() const {
  std::vector<std::string> out;
  for (const auto& [k, _] : factories_) out.push_back(k);
  return out;
}

std::unique_ptr<SpottingModel> ModelRegistry::create(const ModelConfig& config) const {
  auto it = factories_.find(config.key);
  if (it == factories_.end()) throw Error(Errc::ConfigError, "unknown model key '" + config.key + "'");
  return it->second(config);
}

std::unique_ptr<SpottingModel> create_model(const ModelConfig& config) { return ModelRegistry::global().create(config); }

namespace {

// Window rows [origin, origin+length) of a timeline; rows outside are zero and masked.
std::pair<nn::Tensor, std::vector<bool>> cut_window(const nn::Tensor& timeline, std::int64_t origin, std::int64_t length) {
  const auto total = timeline.dim(0);
  const auto row_size = nn::numel(timeline.shape) / std::max<std::int64_t>(total, 1);
  nn::Shape shape = timeline.shape;
  shape[0] = length;
  nn::Tensor window(shape, 0.0);
  std::vector<bool> mask(static_cast<std::size_t>(length), false);
  const auto first = std::max<std::int64_t>(origin, 0), last = std::min(origin + length, total);
  if (last > first) {
    std::copy(timeline.data.begin() + first * row_size, timeline.data.begin() + last * row_size,
              window.data.begin() + (first - origin) * row_size);
    std::fill(mask.begin() + (first - origin), mask.begin() + (last - origin), true);
  }
  return {std::move(window), std::move(mask)};
}

std::int64_t row_time_ms(std::int64_t row, double rate_hz) {
  return std::llround(static_cast<double>(row) * 1000.0 / rate_hz);
}

}  // namespace

ScoreTimeline predict_video(const SpottingModel& model, const nn::Tensor& timeline, double rate_hz,
                            std::int64_t clip_length, std::int64_t eval_stride) {
  if (!(rate_hz > 0.0) || clip_length < 1 || eval_stride < 1 || timeline.rank() < 2) {
    throw Error(Errc::InvalidArgument, "predict_video: invalid rate, clip length, stride or timeline");
  }
  const auto total = timeline.dim(0);
  const auto classes = model.config().num_classes;
  ScoreTimeline out;
  out.rate_hz = rate_hz;
  out.num_classes = classes;

  switch (model.output_mode()) {
    case OutputMode::clip: {
      std::vector<double> rows;
      for (const CenteredWindow& w : centered_windows(total, clip_length, eval_stride)) {
        auto [window, mask] = cut_window(timeline, w.origin, clip_length);
        try {
          const nn::Tensor s = model.predict_window(window, mask);
          rows.insert(rows.end(), s.data.begin(), s.data.end());
          out.timestamps_ms.push_back(row_time_ms(w.center, rate_hz));
        } catch (const Error& e) {
          if (!unscorable(e)) throw;
        }
      }
      out.scores = nn::Tensor({static_cast<std::int64_t>(out.timestamps_ms.size()), classes + 1}, std::move(rows));
      return out;
    }
    case OutputMode::frame: {
      nn::Tensor sum({total, classes + 1}, 0.0);
      std::vector<int> count(static_cast<std::size_t>(total), 0);
      for (const Window& w : window_clips(total, clip_length, eval_stride)) {
        auto [window, mask] = cut_window(timeline, w.start, clip_length);
        const nn::Tensor s = model.predict_window(window, mask);
        for (std::int64_t i = 0; i < clip_length && w.start + i < total; ++i) {
          for (std::int64_t k = 0; k <= classes; ++k) sum(w.start + i, k) += s(i, k);
          ++count[static_cast<std::size_t>(w.start + i)];
        }
      }
      for (std::int64_t r = 0; r < total; ++r) {
        for (std::int64_t k = 0; k <= classes; ++k) sum(r, k) /= count[static_cast<std::size_t>(r)];
        out.timestamps_ms.push_back(row_time_ms(r, rate_hz));
      }
      out.scores = std::move(sum);
      return out;
    }
    case OutputMode::candidates: {
      nn::Tensor best({total, classes}, 0.0);
      for (const Window& w : window_clips(total, clip_length, eval_stride)) {
        auto [window, mask] = cut_window(timeline, w.start, clip_length);
        const nn::Tensor s = model.predict_window(window, mask);
        for (std::int64_t m = 0; m < s.rows(); ++m) {
          const auto row = w.start + std::llround(s(m, 0) * static_cast<double>(clip_length - 1));
          if (row < 0 || row >= total) continue;
          for (std::int64_t k = 0; k < classes; ++k) best(row, k) = std::max(best(row, k), s(m, 1) * s(m, 2 + k));
        }
      }
      for (std::int64_t r = 0; r < total; ++r) out.timestamps_ms.push_back(row_time_ms(r, rate_hz));
      out.scores = std::move(best);
      return out;
    }
  }
  return out;
}

}  // namespace spotkit::models
