// SPDX-License-Identifier: Apache-2.0
#include "spotkit/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include "spotkit/features.hpp"
#include "spotkit/synthetic.hpp"
#include "spotkit/video.hpp"

namespace spotkit {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Config plumbing

fs::path RunConfig::resolve(const std::string& path) const {
  const fs::path p(path);
  return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
}

void apply_override(json& doc, std::string_view dotted_key, std::string_view value) {
  if (dotted_key.empty()) throw Error(Errc::ConfigError, "empty override key");
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted_key.find('.', start);
    const std::string part(dotted_key.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start));
    if (part.empty()) throw Error(Errc::ConfigError, "malformed override key '" + std::string(dotted_key) + "'");
    if (!node->is_object()) {
      throw Error(Errc::ConfigError, "override '" + std::string(dotted_key) + "' descends into a non-object");
    }
    if (dot == std::string_view::npos) {
      json parsed = json::parse(value, nullptr, false);
      (*node)[part] = parsed.is_discarded() ? json(std::string(value)) : parsed;
      return;
    }
    if (!node->contains(part)) (*node)[part] = json::object();
    node = &(*node)[part];
    start = dot + 1;
  }
}

void apply_seed_env(json& doc) {
  const char* env = std::getenv("SPOTKIT_SEED");
  if (!env || !*env) return;
  char* end = nullptr;
  const unsigned long long seed = std::strtoull(env, &end, 10);
  if (*end != '\0') throw Error(Errc::ConfigError, std::string("SPOTKIT_SEED is not an integer: '") + env + "'");
  doc["train"]["seed"] = seed;
  if (doc.contains("seed")) doc["seed"] = seed;  // generate configs keep the seed at the top level
}

RunConfig load_run_config(const fs::path& path, const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::FileNotFound, "config '" + path.string() + "' not found");
  RunConfig config;
  try {
    config.doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::ConfigError, "config '" + path.string() + "': " + e.what());
  }
  if (!config.doc.is_object()) throw Error(Errc::ConfigError, "config must be a JSON object");
  for (const auto& [key, value] : overrides) apply_override(config.doc, key, value);
  apply_seed_env(config.doc);
  config.base_dir = path.parent_path();
  return config;
}

namespace {

const json& section(const RunConfig& config, const char* name) {
  static const json empty = json::object();
  if (!config.doc.contains(name)) return empty;
  const json& s = config.doc.at(name);
  if (!s.is_object()) throw Error(Errc::ConfigError, std::string("config section '") + name + "' must be an object");
  return s;
}

template <typename T>
T get_or(const json& s, const char* section_name, const char* key, T fallback) {
  if (!s.contains(key)) return fallback;
  try {
    return s.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(Errc::ConfigError, std::string(section_name) + "." + key + " has the wrong type");
  }
}

std::string require_string(const json& s, const char* section_name, const char* key) {
  if (!s.contains(key)) throw Error(Errc::ConfigError, std::string("missing required key ") + section_name + "." + key);
  return get_or<std::string>(s, section_name, key, "");
}

Split parse_split(const std::string& name, const char* key) {
  auto split = split_from_string(name);
  if (!split) throw Error(Errc::ConfigError, std::string(key) + ": unknown split '" + name + "'");
  return *split;
}

}  // namespace

DataSection data_section(const RunConfig& config) {
  const json& s = section(config, "data");
  DataSection d;
  d.manifest = config.resolve(require_string(s, "data", "manifest"));
  d.root = s.contains("root") ? config.resolve(get_or<std::string>(s, "data", "root", "")) : d.manifest.parent_path();
  d.train_split = parse_split(get_or<std::string>(s, "data", "train_split", "train"), "data.train_split");
  d.valid_split = parse_split(get_or<std::string>(s, "data", "valid_split", "valid"), "data.valid_split");
  d.decode_fps = get_or(s, "data", "decode_fps", d.decode_fps);
  d.decode_height = get_or(s, "data", "decode_height", d.decode_height);
  if (!(d.decode_fps > 0.0)) throw Error(Errc::ConfigError, "data.decode_fps must be > 0");
  return d;
}

TrainSection train_section(const RunConfig& config) {
  const json& s = section(config, "train");
  TrainSection t;
  t.epochs = get_or(s, "train", "epochs", t.epochs);
  t.batch_size = get_or(s, "train", "batch_size", t.batch_size);
  t.seed = get_or(s, "train", "seed", t.seed);
  t.patience = get_or(s, "train", "patience", t.patience);
  t.checkpoint_dir = config.resolve(get_or<std::string>(s, "train", "checkpoint_dir", "checkpoints"));
  if (s.contains("resume") && !s.at("resume").is_null()) t.resume = config.resolve(get_or<std::string>(s, "train", "resume", ""));
  json opt = json::object();
  opt["kind"] = get_or<std::string>(s, "train", "optimizer", "adam");
  for (const char* key : {"lr", "momentum", "beta1", "beta2", "eps", "clip_norm"}) {
    if (s.contains(key)) opt[key] = s.at(key);
  }
  try {
    t.optimizer = optimizer_config_from_json(opt);
  } catch (const json::exception& e) {
    throw Error(Errc::ConfigError, std::string("train optimizer settings: ") + e.what());
  }
  if (t.epochs < 1) throw Error(Errc::ConfigError, "train.epochs must be >= 1");
  if (t.batch_size < 1) throw Error(Errc::ConfigError, "train.batch_size must be >= 1");
  if (!(t.optimizer.lr > 0.0)) throw Error(Errc::ConfigError, "train.lr must be > 0");
  if (t.patience < 0) throw Error(Errc::ConfigError, "train.patience must be >= 0");
  return t;
}

InferSection infer_section(const RunConfig& config) {
  const json& s = section(config, "infer");
  InferSection i;
  if (s.contains("checkpoint")) i.checkpoint = config.resolve(get_or<std::string>(s, "infer", "checkpoint", ""));
  if (s.contains("clip_length")) i.clip_length = get_or<std::int64_t>(s, "infer", "clip_length", 0);
  if (s.contains("eval_stride")) i.eval_stride = get_or<std::int64_t>(s, "infer", "eval_stride", 0);
  i.threshold = get_or(s, "infer", "threshold", i.threshold);
  i.nms_window_ms = get_or(s, "infer", "nms_window_ms", i.nms_window_ms);
  i.split = parse_split(get_or<std::string>(s, "infer", "split", "test"), "infer.split");
  if (s.contains("output")) i.output = config.resolve(get_or<std::string>(s, "infer", "output", ""));
  if (!(i.threshold >= 0.0)) throw Error(Errc::ConfigError, "infer.threshold must be >= 0");
  if (i.nms_window_ms < 0) throw Error(Errc::ConfigError, "infer.nms_window_ms must be >= 0");
  if ((i.clip_length && *i.clip_length < 1) || (i.eval_stride && *i.eval_stride < 1)) {
    throw Error(Errc::ConfigError, "infer.clip_length and infer.eval_stride must be >= 1");
  }
  return i;
}

EvalSection eval_section(const RunConfig& config) {
  const json& s = section(config, "eval");
  EvalSection e;
  e.predictions = config.resolve(require_string(s, "eval", "predictions"));
  e.ground_truth = config.resolve(require_string(s, "eval", "ground_truth"));
  e.preset = get_or<std::string>(s, "eval", "preset", e.preset);
  e.tolerances = get_or<std::vector<double>>(s, "eval", "tolerances", {});
  if (s.contains("split") && !s.at("split").is_null()) e.split = parse_split(get_or<std::string>(s, "eval", "split", ""), "eval.split");
  if (s.contains("output")) e.output = config.resolve(get_or<std::string>(s, "eval", "output", ""));
  if (e.preset != "loose" && e.preset != "tight" && e.preset != "both" && e.preset != "custom") {
    throw Error(Errc::ConfigError, "eval.preset must be loose, tight, both or custom");
  }
  if (e.preset == "custom" && e.tolerances.empty()) throw Error(Errc::ConfigError, "eval.tolerances required for custom preset");
  for (double t : e.tolerances) {
    if (!(t > 0.0)) throw Error(Errc::ConfigError, "eval.tolerances must be positive");
  }
  return e;
}

PipelineConfig pipeline_section(const RunConfig& config, const models::SpottingModel& model) {
  const json& s = section(config, "pipeline");
  PipelineConfig p;
  p.payload = model.payload();
  p.target_mode = model.target_mode();
  p.clip_length = model.config().clip_length;
  p.stride = get_or(s, "pipeline", "stride", std::max<std::int64_t>(1, p.clip_length / 2));
  p.batch_size = train_section(config).batch_size;
  p.shuffle = get_or(s, "pipeline", "shuffle", p.shuffle);
  p.prefetch_depth = get_or(s, "pipeline", "prefetch_depth", p.prefetch_depth);
  p.frame_radius = get_or(s, "pipeline", "frame_radius", p.frame_radius);
  p.center_radius = get_or(s, "pipeline", "center_radius", p.center_radius);
  p.negatives_per_positive = get_or(s, "pipeline", "negatives_per_positive", p.negatives_per_positive);
  p.hard_negative_radius = get_or(s, "pipeline", "hard_negative_radius", p.hard_negative_radius);
  const std::string sampling = get_or<std::string>(s, "pipeline", "sampling", "auto");
  if (sampling == "auto") p.sampling = model.default_sampling();
  else if (sampling == "sliding") p.sampling = Sampling::sliding;
  else if (sampling == "event_centered") p.sampling = Sampling::event_centered;
  else throw Error(Errc::ConfigError, "pipeline.sampling must be auto, sliding or event_centered");
  if (config.doc.contains("data")) {
    const DataSection d = data_section(config);
    p.decode.target_fps = d.decode_fps;
    p.decode.target_height = d.decode_height;
  }
  if (p.stride < 1 || p.frame_radius < 0 || p.center_radius < 0 || p.negatives_per_positive < 0.0) {
    throw Error(Errc::ConfigError, "pipeline values out of range");
  }
  return p;
}

models::ModelConfig model_section(const RunConfig& config, const DatasetManifest& manifest, const fs::path& root,
                                  std::uint64_t seed) {
  json m = section(config, "model");
  if (!m.contains("num_classes")) m["num_classes"] = manifest.classes.size();
  const std::string key = m.value("key", models::ModelConfig{}.key);
  if (!m.contains("input_dim")) {
    const DatasetManifest train = filter_split(manifest, data_section(config).train_split);
    if (train.videos.empty()) throw Error(Errc::ConfigError, "cannot infer model.input_dim: training split is empty");
    const VideoEntry& first = train.videos.front();
    if (key == "pts") {
      if (!first.path) throw Error(Errc::ConfigError, "video '" + first.id() + "' has no video path");
      m["input_dim"] = read_raw_video_info(root / *first.path).channels;
    } else {
      m["input_dim"] = load_feature_sequence(first, root).dim();
    }
  }
  m["init_seed"] = seed;
  return models::model_config_from_json(m);
}

InferenceSettings inference_settings(const InferSection& section, const models::SpottingModel& model) {
  InferenceSettings s;
  s.clip_length = section.clip_length.value_or(model.config().clip_length);
  const std::int64_t default_stride =
      model.output_mode() == models::OutputMode::clip ? 1 : std::max<std::int64_t>(1, s.clip_length / 2);
  s.eval_stride = section.eval_stride.value_or(default_stride);
  s.threshold = section.threshold;
  s.nms_window_ms = section.nms_window_ms;
  return s;
}

DatasetManifest predict_manifest(const models::SpottingModel& model, const ClipDataset& dataset,
                                 const InferenceSettings& settings) {
  const DatasetManifest& source = dataset.manifest();
  DatasetManifest out;
  out.dataset_name = source.dataset_name;
  out.classes = source.classes;
  out.metadata = {{"predictions", true}};
  for (std::size_t v = 0; v < dataset.num_videos(); ++v) {
    const VideoEntry& entry = source.videos[v];
    VideoEntry pred;
    pred.path = entry.path;
    pred.features_path = entry.features_path;
    pred.duration_ms = entry.duration_ms;
    pred.fps = entry.fps;
    pred.split = entry.split;
    const Timeline& t = dataset.timeline(v);
    const models::ScoreTimeline scores =
        models::predict_video(model, t.data, t.rate_hz, settings.clip_length, settings.eval_stride);
    for (const SpotPrediction& spot :
         extract_spots(scores, source.classes, entry.id(), settings.threshold, settings.nms_window_ms)) {
      const auto position = std::clamp<std::int64_t>(spot.position_ms, 0, entry.duration_ms);
      pred.annotations.push_back({spot.label, position, std::clamp(spot.confidence, 0.0, 1.0), json::object()});
    }
    out.videos.push_back(std::move(pred));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training

namespace {

fs::path epoch_checkpoint(const fs::path& dir, std::int64_t epoch) {
  char name[32];
  std::snprintf(name, sizeof name, "epoch_%03lld.ckpt", static_cast<long long>(epoch));
  return dir / name;
}

std::shared_ptr<const ClipDataset> make_dataset(const DatasetManifest& manifest, Split split, const fs::path& root,
                                                const PipelineConfig& pipeline) {
  return std::make_shared<const ClipDataset>(filter_split(manifest, split), root, pipeline.payload, pipeline.decode,
                                             pipeline.decode_backend);
}

}  // namespace

TrainResult cmd_train(const RunConfig& config) {
  const DataSection data = data_section(config);
  const TrainSection train = train_section(config);
  const InferSection infer = infer_section(config);
  const DatasetManifest manifest = load_manifest(data.manifest);

  auto model = models::create_model(model_section(config, manifest, data.root, train.seed));
  nn::Optimizer optimizer(train.optimizer);
  const PipelineConfig pipeline = pipeline_section(config, *model);
  const auto train_set = make_dataset(manifest, data.train_split, data.root, pipeline);
  if (train_set->num_videos() == 0) throw Error(Errc::ConfigError, "training split is empty");
  const auto valid_set = make_dataset(manifest, data.valid_split, data.root, pipeline);
  const bool validate = valid_set->num_videos() > 0 && data.valid_split != data.train_split;
  const InferenceSettings settings = inference_settings(infer, *model);

  TrainResult result;
  result.best.metric = validate ? "val_loose_map" : "neg_train_loss";
  std::int64_t first_epoch = 1, stale = 0;
  if (train.resume) {
    const Checkpoint ck = load_checkpoint(*train.resume);
    restore_params(*model, ck);
    if (optimizer_config_to_json(ck.optimizer) != optimizer_config_to_json(train.optimizer)) {
      throw Error(Errc::CheckpointMismatch, "resume checkpoint used different optimizer settings");
    }
    optimizer.restore(ck.optimizer_steps, ck.optimizer_state);
    first_epoch = ck.epoch + 1;
    result.best = ck.best;
    stale = ck.stale_epochs;
  }

  std::error_code ec;
  fs::create_directories(train.checkpoint_dir, ec);
  if (ec) throw Error(Errc::IoError, "cannot create '" + train.checkpoint_dir.string() + "': " + ec.message());
  result.log_path = train.checkpoint_dir / "train_log.jsonl";
  std::ofstream log(result.log_path, first_epoch == 1 ? std::ios::trunc : std::ios::app);
  if (!log) throw Error(Errc::IoError, "cannot write '" + result.log_path.string() + "'");
  result.best_checkpoint = train.checkpoint_dir / "best.ckpt";
  result.last_epoch = first_epoch - 1;

  for (std::int64_t epoch = first_epoch; epoch <= train.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    BatchIterator batches = batch_iterator(train_set, pipeline, train.seed, static_cast<std::uint64_t>(epoch));
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    while (auto batch = batches.next()) {
      model->params().zero_grad();
      nn::Var loss = model->batch_loss(*batch);
      if (!loss.requires_grad()) continue;
      nn::backward(loss);
      optimizer.step(model->params());
      loss_sum += loss.value().data[0];
      ++loss_count;
    }
    const double train_loss = loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0;

    json line = {{"event", "epoch"}, {"epoch", epoch}, {"train_loss", train_loss}, {"batches", loss_count}};
    double metric = -train_loss, tiebreak = 0.0;
    if (validate) {
      const DatasetManifest predictions = predict_manifest(*model, *valid_set, settings);
      const EvalReport report = evaluate(predictions, valid_set->manifest());
      metric = report.average_map_loose;
      tiebreak = report.average_map_tight;
      line["val_loose_map"] = report.average_map_loose;
      line["val_tight_map"] = report.average_map_tight;
    }
    const bool improved = result.best.epoch == 0 || metric > result.best.value ||
                          (metric == result.best.value && tiebreak > result.best.tiebreak);
    if (improved) {
      result.best.value = metric;
      result.best.tiebreak = tiebreak;
      result.best.epoch = epoch;
      stale = 0;
    } else {
      ++stale;
    }

    Checkpoint ck = make_checkpoint(*model, optimizer);
    ck.epoch = epoch;
    ck.best = result.best;
    ck.stale_epochs = stale;
    result.final_checkpoint = epoch_checkpoint(train.checkpoint_dir, epoch);
    save_checkpoint(ck, result.final_checkpoint);
    if (improved) save_checkpoint(ck, result.best_checkpoint);
    result.last_epoch = epoch;

    line["improved"] = improved;
    line["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    log << line.dump() << '\n' << std::flush;
    if (train.patience > 0 && stale >= train.patience) {
      result.early_stopped = true;
      log << json{{"event", "early_stop"}, {"epoch", epoch}}.dump() << '\n';
      break;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Other commands

DatasetManifest cmd_infer(const RunConfig& config) {
  const DataSection data = data_section(config);
  const InferSection infer = infer_section(config);
  if (!infer.checkpoint) throw Error(Errc::ConfigError, "missing required key infer.checkpoint");
  if (!infer.output) throw Error(Errc::ConfigError, "missing required key infer.output");
  const Checkpoint ck = load_checkpoint(*infer.checkpoint);
  const json& model_cfg = section(config, "model");
  if (model_cfg.contains("key") && model_cfg.at("key") != ck.model.key) {
    throw Error(Errc::CheckpointMismatch, "checkpoint holds a '" + ck.model.key + "' model, config asks for '" +
                                              model_cfg.at("key").get<std::string>() + "'");
  }
  auto model = models::create_model(ck.model);
  restore_params(*model, ck);

  const DatasetManifest manifest = load_manifest(data.manifest);
  if (manifest.classes.size() != static_cast<std::size_t>(ck.model.num_classes)) {
    throw Error(Errc::CheckpointMismatch, "checkpoint class count differs from the manifest");
  }
  PipelineConfig pipeline;
  pipeline.payload = model->payload();
  pipeline.decode.target_fps = data.decode_fps;
  pipeline.decode.target_height = data.decode_height;
  const auto dataset = make_dataset(manifest, infer.split, data.root, pipeline);
  const DatasetManifest predictions = predict_manifest(*model, *dataset, inference_settings(infer, *model));
  save_manifest(predictions, *infer.output);
  return predictions;
}

EvalReport cmd_evaluate(const RunConfig& config, std::ostream& out) {
  const EvalSection e = eval_section(config);
  const DatasetManifest predictions = load_manifest(e.predictions);
  DatasetManifest truth = load_manifest(e.ground_truth);
  if (e.split) truth = filter_split(truth, *e.split);
  EvalOptions options;
  options.extra_tolerances = e.tolerances;
  const EvalReport report = evaluate(predictions, truth, options);

  std::vector<double> shown;
  if (e.preset == "loose" || e.preset == "both") shown = loose_tolerances();
  if (e.preset == "tight" || e.preset == "both") {
    for (double t : tight_tolerances()) shown.push_back(t);
  }
  if (e.preset == "custom") shown = e.tolerances;
  std::sort(shown.begin(), shown.end());
  shown.erase(std::unique(shown.begin(), shown.end()), shown.end());
  out << format_report_table(report, shown);

  if (e.output) {
    std::error_code ec;
    if (e.output->has_parent_path()) fs::create_directories(e.output->parent_path(), ec);
    std::ofstream file(*e.output, std::ios::trunc);
    file << report_to_json(report).dump(2) << '\n';
    file.close();
    if (!file) throw Error(Errc::IoError, "cannot write '" + e.output->string() + "'");
  }
  return report;
}

ConversionResult cmd_convert(const RunConfig& config) {
  const json& s = section(config, "convert");
  const fs::path root = config.resolve(require_string(s, "convert", "legacy_root"));
  const fs::path mapping_path = config.resolve(require_string(s, "convert", "mapping"));
  const fs::path output = config.resolve(require_string(s, "convert", "output"));
  std::ifstream in(mapping_path);
  if (!in) throw Error(Errc::FileNotFound, "mapping '" + mapping_path.string() + "' not found");
  json mapping;
  try {
    mapping = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::ConfigError, "mapping '" + mapping_path.string() + "': " + e.what());
  }
  ConversionResult result = convert_legacy(root, parse_legacy_mapping(mapping));
  save_manifest(result.manifest, output);
  return result;
}

ValidationReport cmd_validate(const RunConfig& config) {
  const json& s = section(config, "validate");
  const fs::path path = config.resolve(require_string(s, "validate", "manifest"));
  ValidateOptions options;
  options.strict = get_or(s, "validate", "strict", true);
  options.require_confidence = get_or(s, "validate", "require_confidence", false);
  if (get_or(s, "validate", "check_media", false)) {
    options.media_root = s.contains("media_root") ? config.resolve(s.at("media_root").get<std::string>()) : path.parent_path();
  }
  ParseOptions parse;
  parse.strict = false;
  return validate_manifest(load_manifest(path, parse), options);
}

DatasetManifest cmd_generate(const RunConfig& config) {
  const json& s = config.doc.contains("generate") ? section(config, "generate") : config.doc;
  json spec = s;
  const fs::path out_root = config.resolve(require_string(s, "generate", "out_root"));
  spec.erase("out_root");
  return generate(synth_spec_from_json(spec), out_root);
}

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::ConfigError:
    case Errc::InvalidArgument:
    case Errc::InvalidSpec:
    case Errc::VocabularyMismatch:
    case Errc::CheckpointMismatch:
    case Errc::NonPositiveTolerance:
      return 2;
    case Errc::FileNotFound:
    case Errc::IoError:
      return 3;
    default:
      return 1;
  }
}

namespace {

void print_issues(const ValidationReport& report, std::ostream& out) {
  for (const auto& e : report.errors) out << "error   " << e.code << " " << e.location << ": " << e.message << '\n';
  for (const auto& w : report.warnings) out << "warning " << w.code << " " << w.location << ": " << w.message << '\n';
  out << (report.is_valid() ? "valid" : "invalid") << " (" << report.errors.size() << " errors, "
      << report.warnings.size() << " warnings)\n";
}

}  // namespace

int run_command(std::string_view command, const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    if (command == "train") {
      const TrainResult r = cmd_train(config);
      out << "trained " << r.last_epoch << " epochs" << (r.early_stopped ? " (early stop)" : "") << "; best "
          << r.best.metric << " = " << r.best.value << " at epoch " << r.best.epoch << '\n'
          << "final checkpoint: " << r.final_checkpoint.string() << '\n';
      return 0;
    }
    if (command == "infer") {
      const DatasetManifest m = cmd_infer(config);
      std::size_t spots = 0;
      for (const auto& v : m.videos) spots += v.annotations.size();
      out << "wrote " << spots << " spots for " << m.videos.size() << " videos\n";
      return 0;
    }
    if (command == "evaluate") {
      cmd_evaluate(config, out);
      return 0;
    }
    if (command == "convert") {
      const ConversionResult r = cmd_convert(config);
      for (const auto& w : r.warnings) err << "warning: " << w << '\n';
      out << "converted " << r.manifest.videos.size() << " videos, " << r.annotations_read << " annotations\n";
      return 0;
    }
    if (command == "validate") {
      const ValidationReport r = cmd_validate(config);
      print_issues(r, out);
      return r.is_valid() ? 0 : 1;
    }
    if (command == "generate") {
      const DatasetManifest m = cmd_generate(config);
      std::size_t events = 0;
      for (const auto& v : m.videos) events += v.annotations.size();
      out << "generated " << m.videos.size() << " videos, " << events << " events\n";
      return 0;
    }
    err << "unknown command '" << command << "'\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace spotkit
