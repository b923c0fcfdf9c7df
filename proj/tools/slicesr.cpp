// slicesr: reduce the inter-slice spacing of SRV1 volumes at an arbitrary
// integer ratio with a single trained model, or evaluate reconstructions
// against ground truth.

#include "ssr/checkpoint.hpp"
#include "ssr/metrics.hpp"
#include "ssr/model.hpp"
#include "ssr/run_config.hpp"
#include "ssr/training.hpp"
#include "ssr/volume_io.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace {

namespace fs = std::filesystem;

std::vector<std::string> list_srv_files(const std::string& dir) {
  std::vector<std::string> files;
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: '" + dir + "'");
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".srv")
      files.push_back(entry.path().string());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::runtime_error("no .srv volumes in '" + dir + "'");
  return files;
}

std::vector<int> parse_k_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  if (out.empty()) throw std::runtime_error("empty k list");
  return out;
}

template <typename Scalar>
void require_normalized(const ssr::Volume<Scalar>& vol, const std::string& path) {
  if (vol.data.minCoeff() < Scalar(0) || vol.data.maxCoeff() > Scalar(1))
    throw std::runtime_error("'" + path + "' has intensities outside [0, 1]; " +
                             "normalize volumes before inference");
}

int cmd_simulate_lr(const std::string& in, const std::string& out, int k) {
  const auto vol = ssr::load_volume<float>(in);
  ssr::save_volume(ssr::simulate_lr(vol, k), out);
  return 0;
}

template <typename Scalar>
void run_training(const ssr::RunConfig& cfg, const std::vector<std::string>& files,
                  const std::string& out_checkpoint, const std::string& resume) {
  std::vector<ssr::Volume<Scalar>> dataset;
  dataset.reserve(files.size());
  for (const auto& f : files) dataset.push_back(ssr::normalize(ssr::load_volume<Scalar>(f)));

  ssr::Trainer<Scalar> trainer =
      resume.empty()
          ? ssr::Trainer<Scalar>::make(ssr::model_config(cfg), ssr::train_config(cfg))
          : ssr::trainer_from_checkpoint(ssr::load_checkpoint<Scalar>(resume),
                                         ssr::train_config(cfg));

  std::ofstream log;
  if (!cfg.train_log.empty()) {
    log.open(cfg.train_log, std::ios::app);
    if (!log) throw std::runtime_error("cannot open train log '" + cfg.train_log + "'");
  }
  double epoch_loss = 0.0;
  long epoch_steps = 0;
  ssr::train_epochs(trainer, std::span<const ssr::Volume<Scalar>>(dataset), cfg.epochs,
                    [&](long epoch, long step, const ssr::StepRecord& rec) {
                      if (log.is_open())
                        log << "{\"epoch\":" << epoch << ",\"step\":" << step
                            << ",\"k\":" << rec.ratio << ",\"loss\":" << rec.loss << "}\n";
                      epoch_loss += rec.loss;
                      ++epoch_steps;
                      if (step + 1 == trainer.config.steps_per_epoch) {
                        std::cout << "epoch " << epoch << " loss " << (epoch_loss / epoch_steps)
                                  << std::endl;
                        epoch_loss = 0.0;
                        epoch_steps = 0;
                      }
                    });
  ssr::save_checkpoint(ssr::to_checkpoint(trainer, ssr::serialize_run_config(cfg)),
                       out_checkpoint);
}

int cmd_train(const std::string& config_path, const std::string& data_dir,
              const std::string& out_checkpoint, const std::string& resume,
              const std::string& seed_override, const std::string& epochs_override) {
  ssr::RunConfig cfg =
      config_path.empty() ? ssr::RunConfig{} : ssr::load_run_config(config_path);
  if (!seed_override.empty()) cfg.seed = std::stoull(seed_override);
  if (!epochs_override.empty()) cfg.epochs = std::stol(epochs_override);
  const std::string dir = data_dir.empty() ? cfg.data_dir : data_dir;
  if (dir.empty()) throw std::runtime_error("no data directory given (--data_dir or data.dir)");
  const auto files = list_srv_files(dir);
  if (cfg.precision == "float")
    run_training<float>(cfg, files, out_checkpoint, resume);
  else
    run_training<double>(cfg, files, out_checkpoint, resume);
  return 0;
}

int cmd_infer(const std::string& checkpoint, const std::string& in, const std::string& out,
              int k, bool baseline, int threads) {
  const auto lr = ssr::load_volume<double>(in);
  require_normalized(lr, in);
  if (baseline) {
    ssr::save_volume(ssr::interpolation_baseline(lr, k), out);
    return 0;
  }
  if (checkpoint.empty()) throw std::runtime_error("--checkpoint required unless --baseline");
  const auto ck = ssr::load_checkpoint<double>(checkpoint);
  ssr::save_volume(ssr::super_resolve(lr, k, ck.params, ck.model_config, threads), out);
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& gt_dir, const std::string& k_list,
             const std::string& report_out, const std::string& error_map_dir, int threads) {
  const auto files = list_srv_files(gt_dir);
  std::vector<ssr::Volume<double>> volumes;
  std::vector<std::string> names;
  for (const auto& f : files) {
    volumes.push_back(ssr::load_volume<double>(f));
    names.push_back(fs::path(f).filename().string());
  }

  std::vector<ssr::MethodSpec<double>> methods;
  methods.push_back({"interpolation", [](const ssr::Volume<double>& lr, int k) {
                       return ssr::interpolation_baseline(lr, k);
                     }});
  ssr::Checkpoint<double> ck;
  if (!checkpoint.empty()) {
    ck = ssr::load_checkpoint<double>(checkpoint);
    methods.push_back({"model", [&ck, threads](const ssr::Volume<double>& lr, int k) {
                         return ssr::super_resolve(lr, k, ck.params, ck.model_config, threads);
                       }});
  }
  ssr::EvalSink<double> sink;
  if (!error_map_dir.empty()) {
    fs::create_directories(error_map_dir);
    sink = [&error_map_dir](const ssr::EvalEntry& entry, const ssr::Volume<double>& recon,
                            const ssr::Volume<double>& gt) {
      const std::string name = fs::path(entry.volume).stem().string() + "_" + entry.method +
                               "_x" + std::to_string(entry.ratio) + ".srv";
      ssr::save_volume(ssr::error_map(recon, gt), (fs::path(error_map_dir) / name).string());
    };
  }
  const ssr::MetricsReport report =
      ssr::evaluate(methods, volumes, names, parse_k_list(k_list), sink);
  const std::string table = report.to_table();
  std::cout << table;
  if (!report_out.empty()) {
    std::ofstream tf(report_out);
    if (!tf) throw std::runtime_error("cannot write '" + report_out + "'");
    tf << table;
    std::ofstream jf(report_out + ".jsonl");
    jf << report.to_ldjson();
  }
  return 0;
}

int cmd_grad_check(const std::string& config_path, double tolerance) {
  const ssr::RunConfig cfg =
      config_path.empty() ? ssr::RunConfig{} : ssr::load_run_config(config_path);
  const ssr::GradCheckReport report = ssr::gradient_check(ssr::model_config(cfg), tolerance);
  for (const auto& e : report.entries)
    std::cout << (e.pass ? "pass " : "FAIL ") << e.tensor << " max_rel_err " << e.max_rel_err
              << '\n';
  std::cout << (report.passed ? "gradient check passed" : "gradient check FAILED") << std::endl;
  return report.passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"arbitrary-ratio slice super-resolution for SRV1 volumes"};
  app.require_subcommand(1);

  std::string in, out, checkpoint, config_path, data_dir, out_checkpoint, resume;
  std::string gt_dir, k_list, report_out, error_map_dir, seed_override, epochs_override;
  int k = 2;
  int threads = 1;
  bool baseline = false;
  double tolerance = 1e-4;

  auto* sim = app.add_subcommand("simulate_lr", "drop slices, keeping every k-th");
  sim->add_option("--in", in, "input .srv volume")->required();
  sim->add_option("--out", out, "output .srv volume")->required();
  sim->add_option("--k", k, "slice-keeping ratio (integer >= 1)")->required();

  auto* train = app.add_subcommand("train", "train a model on a directory of HR volumes");
  train->add_option("--config", config_path, "run configuration file");
  train->add_option("--data_dir", data_dir, "directory of .srv HR volumes");
  train->add_option("--out_checkpoint", out_checkpoint, "checkpoint to write")->required();
  train->add_option("--resume", resume, "checkpoint to resume from");
  train->add_option("--seed", seed_override, "override config seed");
  train->add_option("--epochs", epochs_override, "override config epochs");

  auto* infer = app.add_subcommand("infer", "reduce slice spacing of an LR volume by k");
  infer->add_option("--checkpoint", checkpoint, "trained model checkpoint");
  infer->add_option("--in", in, "input .srv volume")->required();
  infer->add_option("--out", out, "output .srv volume")->required();
  infer->add_option("--k", k, "up-sampling ratio (integer >= 1)")->required();
  infer->add_flag("--baseline", baseline, "use plain trilinear interpolation");
  infer->add_option("--threads", threads, "worker threads");

  auto* eval = app.add_subcommand("eval", "score reconstructions against ground truth");
  eval->add_option("--checkpoint", checkpoint, "trained model checkpoint (optional)");
  eval->add_option("--gt_dir", gt_dir, "directory of .srv ground-truth volumes")->required();
  eval->add_option("--k_list", k_list, "comma-separated ratios, e.g. 2,3,4")->required();
  eval->add_option("--report_out", report_out, "report file (plus .jsonl records)");
  eval->add_option("--error_map_dir", error_map_dir,
                   "write |reconstruction - ground truth| volumes here");
  eval->add_option("--threads", threads, "worker threads");

  auto* grad = app.add_subcommand("grad_check", "finite-difference check of all gradients");
  grad->add_option("--config", config_path, "run configuration file (use a tiny model)");
  grad->add_option("--tolerance", tolerance, "max relative error allowed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate_lr(in, out, k);
    if (train->parsed())
      return cmd_train(config_path, data_dir, out_checkpoint, resume, seed_override,
                       epochs_override);
    if (infer->parsed()) return cmd_infer(checkpoint, in, out, k, baseline, threads);
    if (eval->parsed())
      return cmd_eval(checkpoint, gt_dir, k_list, report_out, error_map_dir, threads);
    if (grad->parsed()) return cmd_grad_check(config_path, tolerance);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
