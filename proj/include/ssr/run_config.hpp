#pragma once

#include "ssr/model.hpp"
#include "ssr/training.hpp"

#include <string>
#include <vector>

namespace ssr {

/// Flat key = value run configuration. Every key has a default; unknown keys
/// are rejected. parse(serialize(parse(text))) == parse(text).
struct RunConfig {
  std::uint64_t seed = 1234;
  int threads = 1;
  int window = 7;
  Index encoder_channels = 64;
  Index encoder_blocks = 16;
  Index decoder_hidden = 256;
  Index decoder_layers = 5;
  double learning_rate = 1e-4;
  int batch_size = 2;
  long epochs = 50;
  long steps_per_epoch = 100;
  std::vector<int> k_set = {1, 2, 3, 4};
  Index patch_in_plane = 64;
  Index patch_lr_depth = 17;
  Index max_pairs_per_patch = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::string precision = "double";  // or "float" for speed-mode training
  std::string train_log;             // LDJSON per-step records when non-empty
  std::string data_dir;

  bool operator==(const RunConfig&) const = default;
};

RunConfig parse_run_config(const std::string& text);
std::string serialize_run_config(const RunConfig& cfg);
RunConfig load_run_config(const std::string& path);

inline ModelConfig model_config(const RunConfig& cfg) {
  return {{cfg.encoder_channels, cfg.encoder_blocks},
          {cfg.decoder_layers, cfg.decoder_hidden},
          cfg.window};
}

inline TrainConfig train_config(const RunConfig& cfg) {
  TrainConfig t;
  t.learning_rate = cfg.learning_rate;
  t.batch_size = cfg.batch_size;
  t.epochs = cfg.epochs;
  t.steps_per_epoch = cfg.steps_per_epoch;
  t.k_set = cfg.k_set;
  t.patch_in_plane = cfg.patch_in_plane;
  t.patch_lr_depth = cfg.patch_lr_depth;
  t.max_pairs_per_patch = cfg.max_pairs_per_patch;
  t.adam_beta1 = cfg.adam_beta1;
  t.adam_beta2 = cfg.adam_beta2;
  t.adam_epsilon = cfg.adam_epsilon;
  t.seed = cfg.seed;
  return t;
}

}  // namespace ssr
