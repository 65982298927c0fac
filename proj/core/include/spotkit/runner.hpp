// SPDX-License-Identifier: Apache-2.0
//
// Config-driven commands behind the `spotkit` tool: train, infer, evaluate,
// convert, validate and generate.
//
// A run config is one JSON document with a section per concern (data,
// model, pipeline, train, infer, eval, convert, validate, generate).
// Relative paths resolve against RunConfig::base_dir.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spotkit/batching.hpp"
#include "spotkit/checkpoint.hpp"
#include "spotkit/dataset_format.hpp"
#include "spotkit/eval.hpp"
#include "spotkit/error.hpp"
#include "spotkit/models/model.hpp"

namespace spotkit {

struct RunConfig {
  nlohmann::json doc = nlohmann::json::object();
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::string& path) const;
};

/// Sets a dotted key ("train.lr"); the value is parsed as JSON when possible
/// and kept as a string otherwise. Throws Error{ConfigError}.
void apply_override(nlohmann::json& doc, std::string_view dotted_key, std::string_view value);

/// Reads a config file, applies overrides in order, then SPOTKIT_SEED (when
/// set) as train.seed. base_dir becomes the file's directory.
RunConfig load_run_config(const std::filesystem::path& path,
                          const std::vector<std::pair<std::string, std::string>>& overrides = {});

/// Applies SPOTKIT_SEED to an in-memory config.
void apply_seed_env(nlohmann::json& doc);

struct DataSection {
  std::filesystem::path manifest;
  std::filesystem::path root;  // defaults to the manifest's directory
  Split train_split = Split::train;
  Split valid_split = Split::valid;
  double decode_fps = 2.0;
  std::int64_t decode_height = 0;
};

struct TrainSection {
  std::int64_t epochs = 10;
  std::size_t batch_size = 32;
  nn::OptimizerConfig optimizer;
  std::uint64_t seed = 0;
  std::filesystem::path checkpoint_dir = "checkpoints";
  std::int64_t patience = 0;  // 0 disables early stopping
  std::optional<std::filesystem::path> resume;
};

struct InferSection {
  std::optional<std::filesystem::path> checkpoint;
  std::optional<std::int64_t> clip_length;  // defaults to the model's
  std::optional<std::int64_t> eval_stride;  // clip models: 1, others: clip_length / 2
  double threshold = 0.5;
  std::int64_t nms_window_ms = 4000;
  Split split = Split::test;
  std::optional<std::filesystem::path> output;
};

struct EvalSection {
  std::filesystem::path predictions;
  std::filesystem::path ground_truth;
  std::string preset = "both";  // loose | tight | both | custom
  std::vector<double> tolerances;  // custom preset
  std::optional<Split> split;  // restricts the ground truth
  std::optional<std::filesystem::path> output;
};

DataSection data_section(const RunConfig& config);
TrainSection train_section(const RunConfig& config);
InferSection infer_section(const RunConfig& config);
EvalSection eval_section(const RunConfig& config);
PipelineConfig pipeline_section(const RunConfig& config, const models::SpottingModel& model);
/// model section with num_classes / input_dim filled from the data when
/// absent and init_seed taken from train.seed.
models::ModelConfig model_section(const RunConfig& config, const DatasetManifest& manifest,
                                  const std::filesystem::path& root, std::uint64_t seed);

struct InferenceSettings {
  std::int64_t clip_length = 0;
  std::int64_t eval_stride = 1;
  double threshold = 0.5;
  std::int64_t nms_window_ms = 4000;
};

InferenceSettings inference_settings(const InferSection& section, const models::SpottingModel& model);

/// Spots for every video of `dataset`, as a manifest with confidences.
DatasetManifest predict_manifest(const models::SpottingModel& model, const ClipDataset& dataset,
                                 const InferenceSettings& settings);

struct TrainResult {
  std::filesystem::path final_checkpoint;
  std::filesystem::path best_checkpoint;
  std::filesystem::path log_path;
  std::int64_t last_epoch = 0;
  bool early_stopped = false;
  BestRecord best;
};

/// Trains per config. Each epoch writes epoch_NNN.ckpt and, when the
/// selection metric improves, best.ckpt into train.checkpoint_dir, and
/// appends a JSON line to train_log.jsonl there. The selection metric is
/// validation loose average-mAP (ties broken by tight average-mAP) when the
/// validation split is non-empty, and the negated mean training loss otherwise.
TrainResult cmd_train(const RunConfig& config);

/// Writes (and returns) the prediction manifest for infer.split.
DatasetManifest cmd_infer(const RunConfig& config);

/// Evaluates and prints the table to `out`; writes eval.output when set.
EvalReport cmd_evaluate(const RunConfig& config, std::ostream& out);

ConversionResult cmd_convert(const RunConfig& config);
ValidationReport cmd_validate(const RunConfig& config);
DatasetManifest cmd_generate(const RunConfig& config);

/// 0 success, 1 validation/eval failure, 2 usage/config error, 3 I/O error.
int exit_code_for(Errc code);

/// Runs a command, printing results to `out` and errors to `err`; returns the
/// process exit code.
int run_command(std::string_view command, const RunConfig& config, std::ostream& out, std::ostream& err);

inline constexpr const char* kCommands[] = {"train", "infer", "evaluate", "convert", "validate", "generate"};

}  // namespace spotkit
