#pragma once

#include "ssr/training.hpp"

#include <json.hpp>

#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

namespace ssr {

/// Everything needed to resume a run or serve a model: the model config, a
/// free-form echo of the run configuration, all parameter and optimizer
/// tensors, the sampling RNG state, and the epoch counter.
template <typename Scalar>
struct Checkpoint {
  ModelConfig model_config;
  std::string config_echo;
  ModelParams<Scalar> params;
  AdamState<Scalar> opt;
  long adam_step = 0;
  long epoch = 0;
  std::string rng_state;
};

template <typename Scalar>
Checkpoint<Scalar> to_checkpoint(const Trainer<Scalar>& trainer, std::string config_echo = {}) {
  std::ostringstream rng_text;
  rng_text << trainer.rng;
  return {trainer.model_config, std::move(config_echo), trainer.params, trainer.opt,
          trainer.adam_step,    trainer.epoch,           rng_text.str()};
}

template <typename Scalar>
Trainer<Scalar> trainer_from_checkpoint(const Checkpoint<Scalar>& ck, const TrainConfig& tcfg) {
  Trainer<Scalar> t;
  t.model_config = ck.model_config;
  t.config = tcfg;
  t.params = ck.params;
  t.opt = ck.opt;
  t.adam_step = ck.adam_step;
  t.epoch = ck.epoch;
  std::istringstream rng_text(ck.rng_state);
  rng_text >> t.rng;
  require(static_cast<bool>(rng_text), "checkpoint: bad RNG state");
  return t;
}

namespace detail {

constexpr char kCheckpointMagic[4] = {'S', 'R', 'C', 'P'};
constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace detail

// On-disk layout: magic "SRCP", u32 version, u64 header length, JSON header,
// then every tensor (model params, Adam first/second moments, in tensor_refs
// order) as row-major 64-bit little-endian floats.
template <typename Scalar>
void save_checkpoint(const Checkpoint<Scalar>& ck, const std::string& path) {
  auto ck_mut = ck;  // tensor_refs needs mutable access; shapes are unchanged
  nlohmann::json header;
  header["version"] = detail::kCheckpointVersion;
  header["model"] = {{"channels", ck.model_config.encoder.channels},
                     {"res_blocks", ck.model_config.encoder.res_blocks},
                     {"hidden", ck.model_config.decoder.hidden},
                     {"layers", ck.model_config.decoder.layers},
                     {"window", ck.model_config.window}};
  header["config_echo"] = ck.config_echo;
  header["epoch"] = ck.epoch;
  header["adam_step"] = ck.adam_step;
  header["rng"] = ck.rng_state;
  auto manifest = nlohmann::json::array();
  auto add_tensors = [&](ModelParams<Scalar>& p, const std::string& group) {
    for (const auto& ref : tensor_refs(p))
      manifest.push_back({{"name", group + ref.name},
                          {"rows", ref.tensor->rows()},
                          {"cols", ref.tensor->cols()}});
  };
  add_tensors(ck_mut.params, "");
  add_tensors(ck_mut.opt.first_moment, "adam.m.");
  add_tensors(ck_mut.opt.second_moment, "adam.v.");
  header["tensors"] = manifest;
  const std::string header_text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out.write(detail::kCheckpointMagic, 4);
  const std::uint32_t version = detail::kCheckpointVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  const std::uint64_t header_len = header_text.size();
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
  auto write_params = [&](ModelParams<Scalar>& p) {
    for (const auto& ref : tensor_refs(p)) {
      for (Index r = 0; r < ref.tensor->rows(); ++r)
        for (Index c = 0; c < ref.tensor->cols(); ++c) {
          const double v = static_cast<double>((*ref.tensor)(r, c));
          out.write(reinterpret_cast<const char*>(&v), sizeof(v));
        }
    }
  };
  write_params(ck_mut.params);
  write_params(ck_mut.opt.first_moment);
  write_params(ck_mut.opt.second_moment);
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

template <typename Scalar>
Checkpoint<Scalar> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, detail::kCheckpointMagic, 4) != 0)
    throw std::runtime_error("not a checkpoint file: '" + path + "'");
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (!in || version != detail::kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint version");
  std::uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  std::string header_text(header_len, '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw std::runtime_error("truncated checkpoint header");
  const nlohmann::json header = nlohmann::json::parse(header_text);

  Checkpoint<Scalar> ck;
  ck.model_config.encoder.channels = header.at("model").at("channels").get<Index>();
  ck.model_config.encoder.res_blocks = header.at("model").at("res_blocks").get<Index>();
  ck.model_config.decoder.hidden = header.at("model").at("hidden").get<Index>();
  ck.model_config.decoder.layers = header.at("model").at("layers").get<Index>();
  ck.model_config.window = header.at("model").at("window").get<int>();
  ck.config_echo = header.at("config_echo").get<std::string>();
  ck.epoch = header.at("epoch").get<long>();
  ck.adam_step = header.at("adam_step").get<long>();
  ck.rng_state = header.at("rng").get<std::string>();

  // Allocate shaped tensors from the config, then verify the manifest.
  std::mt19937_64 scratch_rng(0);
  ck.params = init_model<Scalar>(ck.model_config, scratch_rng, false);
  ck.opt = make_adam_state(ck.params);
  const auto& manifest = header.at("tensors");
  std::size_t mi = 0;
  auto read_params = [&](ModelParams<Scalar>& p, const std::string& group) {
    for (const auto& ref : tensor_refs(p)) {
      require(mi < manifest.size(), "checkpoint: manifest too short");
      const auto& entry = manifest[mi++];
      require(entry.at("name").get<std::string>() == group + ref.name &&
                  entry.at("rows").get<Index>() == ref.tensor->rows() &&
                  entry.at("cols").get<Index>() == ref.tensor->cols(),
              "checkpoint: manifest mismatch for " + group + ref.name);
      for (Index r = 0; r < ref.tensor->rows(); ++r)
        for (Index c = 0; c < ref.tensor->cols(); ++c) {
          double v = 0.0;
          in.read(reinterpret_cast<char*>(&v), sizeof(v));
          (*ref.tensor)(r, c) = static_cast<Scalar>(v);
        }
    }
  };
  read_params(ck.params, "");
  read_params(ck.opt.first_moment, "adam.m.");
  read_params(ck.opt.second_moment, "adam.v.");
  if (!in) throw std::runtime_error("truncated checkpoint payload");
  return ck;
}

}  // namespace ssr
