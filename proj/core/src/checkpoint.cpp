// SPDX-License-Identifier: Apache-2.0
#include "spotkit/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "spotkit/error.hpp"

namespace spotkit {

namespace {

constexpr char kMagic[8] = {'S', 'P', 'K', 'C', 'K', 'P', 'T', '\0'};

template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get_le(const std::string& in, std::size_t& offset) {
  if (offset + sizeof(T) > in.size()) throw Error(Errc::CheckpointMismatch, "truncated checkpoint");
  T value;
  std::memcpy(&value, in.data() + offset, sizeof(T));
  offset += sizeof(T);
  return value;
}

void append_tensors(const std::map<std::string, nn::Tensor>& tensors, const char* group, nlohmann::ordered_json& table,
                    std::string& payload) {
  for (const auto& [name, t] : tensors) {
    table.push_back({{"group", group}, {"name", name}, {"shape", t.shape}, {"offset", payload.size() / 8}});
    for (double v : t.data) put_le(payload, v);
  }
}

}  // namespace

nlohmann::ordered_json optimizer_config_to_json(const nn::OptimizerConfig& c) {
  return {{"kind", c.kind == nn::OptimizerKind::adam ? "adam" : "sgd"},
          {"lr", c.lr},
          {"momentum", c.momentum},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"eps", c.eps},
          {"clip_norm", c.clip_norm}};
}

nn::OptimizerConfig optimizer_config_from_json(const nlohmann::json& j) {
  nn::OptimizerConfig c;
  const std::string kind = j.value("kind", std::string("adam"));
  if (kind == "adam") c.kind = nn::OptimizerKind::adam;
  else if (kind == "sgd") c.kind = nn::OptimizerKind::sgd;
  else throw Error(Errc::ConfigError, "optimizer must be 'adam' or 'sgd', got '" + kind + "'");
  c.lr = j.value("lr", c.lr);
  c.momentum = j.value("momentum", c.momentum);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.eps = j.value("eps", c.eps);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  return c;
}

std::string checkpoint_bytes(const Checkpoint& ck) {
  nlohmann::ordered_json header;
  header["model"] = models::model_config_to_json(ck.model);
  header["optimizer"] = optimizer_config_to_json(ck.optimizer);
  header["optimizer_steps"] = ck.optimizer_steps;
  header["epoch"] = ck.epoch;
  header["best"] = {{"metric", ck.best.metric}, {"value", ck.best.value}, {"tiebreak", ck.best.tiebreak}, {"epoch", ck.best.epoch}};
  header["stale_epochs"] = ck.stale_epochs;
  nlohmann::ordered_json table = nlohmann::ordered_json::array();
  std::string payload;
  append_tensors(ck.params, "params", table, payload);
  append_tensors(ck.optimizer_state, "optimizer", table, payload);
  header["tensors"] = table;
  const std::string text = header.dump();

  std::string out(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(out, ck.format_version);
  put_le<std::uint64_t>(out, text.size());
  out += text;
  out += payload;
  return out;
}

Checkpoint parse_checkpoint(const std::string& bytes) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw Error(Errc::CheckpointMismatch, "not a spotkit checkpoint");
  }
  std::size_t offset = sizeof kMagic;
  Checkpoint ck;
  ck.format_version = get_le<std::uint32_t>(bytes, offset);
  if (ck.format_version != kCheckpointVersion) {
    throw Error(Errc::CheckpointMismatch, "unsupported checkpoint version " + std::to_string(ck.format_version));
  }
  const auto header_size = get_le<std::uint64_t>(bytes, offset);
  if (offset + header_size > bytes.size()) throw Error(Errc::CheckpointMismatch, "truncated checkpoint header");
  const std::size_t data_start = offset + header_size;
  try {
    const auto header = nlohmann::json::parse(bytes.substr(offset, header_size));
    ck.model = models::model_config_from_json(header.at("model"));
    ck.optimizer = optimizer_config_from_json(header.at("optimizer"));
    ck.optimizer_steps = header.at("optimizer_steps").get<std::int64_t>();
    ck.epoch = header.at("epoch").get<std::int64_t>();
    const auto& best = header.at("best");
    ck.best = {best.at("metric").get<std::string>(), best.at("value").get<double>(), best.at("tiebreak").get<double>(),
               best.at("epoch").get<std::int64_t>()};
    ck.stale_epochs = header.at("stale_epochs").get<std::int64_t>();
    for (const auto& entry : header.at("tensors")) {
      nn::Tensor t(entry.at("shape").get<nn::Shape>(), 0.0);
      std::size_t pos = data_start + entry.at("offset").get<std::size_t>() * 8;
      for (double& v : t.data) v = get_le<double>(bytes, pos);
      const auto group = entry.at("group").get<std::string>();
      auto& target = group == "params" ? ck.params : ck.optimizer_state;
      target[entry.at("name").get<std::string>()] = std::move(t);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::CheckpointMismatch, std::string("corrupt checkpoint header: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::CheckpointMismatch) throw;
    throw Error(Errc::CheckpointMismatch, e.what());
  }
  return ck;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  const std::string bytes = checkpoint_bytes(checkpoint);
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) throw Error(Errc::IoError, "cannot write checkpoint '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::FileNotFound, "checkpoint '" + path.string() + "' not found");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_checkpoint(buf.str());
}

Checkpoint make_checkpoint(const models::SpottingModel& model, const nn::Optimizer& optimizer) {
  Checkpoint ck;
  ck.model = model.config();
  for (const auto& [name, var] : model.params()) ck.params[name] = var.value();
  ck.optimizer = optimizer.config();
  ck.optimizer_steps = optimizer.steps();
  ck.optimizer_state = optimizer.state();
  return ck;
}

void restore_params(models::SpottingModel& model, const Checkpoint& checkpoint) {
  if (models::model_config_to_json(model.config()) != models::model_config_to_json(checkpoint.model)) {
    throw Error(Errc::CheckpointMismatch, "checkpoint was written for a different model config");
  }
  if (checkpoint.params.size() != model.params().size()) {
    throw Error(Errc::CheckpointMismatch, "checkpoint parameter set differs from the model");
  }
  for (auto& [name, var] : model.params()) {
    auto it = checkpoint.params.find(name);
    if (it == checkpoint.params.end() || it->second.shape != var.value().shape) {
      throw Error(Errc::CheckpointMismatch, "checkpoint lacks parameter '" + name + "' or its shape differs");
    }
    var.mutable_value() = it->second;
  }
}

}  // namespace spotkit
