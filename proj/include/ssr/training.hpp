#pragma once

#include "ssr/model.hpp"
#include "ssr/synthetic.hpp"

#include <cmath>
#include <numeric>
#include <span>
#include <sstream>
#include <vector>

namespace ssr {

struct TrainConfig {
  double learning_rate = 1e-4;
  int batch_size = 2;
  long epochs = 50;            // desk-scale default; paper-scale runs use 2000
  long steps_per_epoch = 100;
  std::vector<int> k_set = {1, 2, 3, 4};
  Index patch_in_plane = 64;
  Index patch_lr_depth = 17;
  Index max_pairs_per_patch = 0;  // 0 keeps every coordinate pair of a patch
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 1234;
};

/// Mean absolute difference.
template <typename Scalar>
Scalar l1_loss(const VectorX<Scalar>& pred, const VectorX<Scalar>& target) {
  if (pred.size() == 0) throw std::invalid_argument("l1_loss: empty inputs");
  require(pred.size() == target.size(), "l1_loss: length mismatch");
  return (pred - target).cwiseAbs().sum() / static_cast<Scalar>(pred.size());
}

template <typename Scalar>
struct AdamState {
  ModelParams<Scalar> first_moment;
  ModelParams<Scalar> second_moment;
};

template <typename Scalar>
AdamState<Scalar> make_adam_state(const ModelParams<Scalar>& like) {
  return {zero_like(like), zero_like(like)};
}

/// One bias-corrected Adam update; `t` counts updates starting at 1.
template <typename Scalar>
void adam_update(ModelParams<Scalar>& params, ModelParams<Scalar>& grads,
                 AdamState<Scalar>& state, long t, const TrainConfig& cfg) {
  require(t >= 1, "adam_update: step index must be >= 1");
  const Scalar b1 = static_cast<Scalar>(cfg.adam_beta1);
  const Scalar b2 = static_cast<Scalar>(cfg.adam_beta2);
  const Scalar lr = static_cast<Scalar>(cfg.learning_rate);
  const Scalar eps = static_cast<Scalar>(cfg.adam_epsilon);
  const Scalar c1 = Scalar(1) - static_cast<Scalar>(std::pow(cfg.adam_beta1, t));
  const Scalar c2 = Scalar(1) - static_cast<Scalar>(std::pow(cfg.adam_beta2, t));

  auto ps = tensor_refs(params);
  auto gs = tensor_refs(grads);
  auto ms = tensor_refs(state.first_moment);
  auto vs = tensor_refs(state.second_moment);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const auto& g = *gs[i].tensor;
    if (!g.allFinite())
      throw std::runtime_error("adam_update: non-finite gradient for " + ps[i].name);
    auto& m = *ms[i].tensor;
    auto& v = *vs[i].tensor;
    m = b1 * m + (Scalar(1) - b1) * g;
    v = (b2 * v.array() + (Scalar(1) - b2) * g.array().square()).matrix();
    ps[i].tensor->array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
}

/// Draw one training batch: a single ratio k for the whole batch, then a
/// uniformly random volume and patch origin per element. When
/// `max_pairs_per_patch` caps supervision, a uniform subsample of the
/// coordinate pairs is kept.
template <typename Scalar>
std::vector<PatchPair<Scalar>> sample_batch(std::span<const Volume<Scalar>> dataset,
                                            const TrainConfig& cfg, std::mt19937_64& rng) {
  require(!dataset.empty(), "sample_batch: empty dataset");
  require(!cfg.k_set.empty(), "sample_batch: empty k set");
  const int ratio = cfg.k_set[static_cast<std::size_t>(uniform_index(
      rng, static_cast<Index>(cfg.k_set.size())))];
  const Index hr_depth = (cfg.patch_lr_depth - 1) * ratio + 1;

  std::vector<PatchPair<Scalar>> batch;
  batch.reserve(static_cast<std::size_t>(cfg.batch_size));
  for (int b = 0; b < cfg.batch_size; ++b) {
    const auto& vol = dataset[static_cast<std::size_t>(
        uniform_index(rng, static_cast<Index>(dataset.size())))];
    const Index max_x = vol.dims.height - cfg.patch_in_plane;
    const Index max_y = vol.dims.width - cfg.patch_in_plane;
    const Index max_z = vol.dims.depth - hr_depth;
    if (max_x < 0 || max_y < 0 || max_z < 0)
      throw std::runtime_error("sample_batch: volume too small for a k=" +
                               std::to_string(ratio) + " patch");
    const std::array<Index, 3> origin = {uniform_index(rng, max_x + 1),
                                         uniform_index(rng, max_y + 1),
                                         uniform_index(rng, max_z + 1)};
    PatchPair<Scalar> patch =
        crop_patch(vol, origin, ratio, cfg.patch_in_plane, cfg.patch_lr_depth);
    const Index n = static_cast<Index>(patch.coords.size());
    if (cfg.max_pairs_per_patch > 0 && cfg.max_pairs_per_patch < n) {
      const Index m = cfg.max_pairs_per_patch;
      std::vector<Index> idx(static_cast<std::size_t>(n));
      std::iota(idx.begin(), idx.end(), Index(0));
      for (Index i = 0; i < m; ++i)
        std::swap(idx[static_cast<std::size_t>(i)],
                  idx[static_cast<std::size_t>(i + uniform_index(rng, n - i))]);
      std::vector<QueryPoint> coords(static_cast<std::size_t>(m));
      VectorX<Scalar> targets(m);
      for (Index i = 0; i < m; ++i) {
        const Index src = idx[static_cast<std::size_t>(i)];
        coords[static_cast<std::size_t>(i)] = patch.coords[static_cast<std::size_t>(src)];
        targets[i] = patch.targets[src];
      }
      patch.coords = std::move(coords);
      patch.targets = std::move(targets);
    }
    batch.push_back(std::move(patch));
  }
  return batch;
}

/// L1 loss over every coordinate pair of the batch; when `grads` is given,
/// accumulates d(loss)/d(params) through decoder, attention, sampling, and
/// encoder.
template <typename Scalar>
Scalar compute_loss_and_grads(const ModelParams<Scalar>& params, int window,
                              std::span<const PatchPair<Scalar>> batch,
                              ModelParams<Scalar>* grads) {
  Index total_pairs = 0;
  for (const auto& patch : batch) total_pairs += static_cast<Index>(patch.coords.size());
  require(total_pairs > 0, "compute_loss_and_grads: no coordinate pairs");
  const Scalar inv_n = Scalar(1) / static_cast<Scalar>(total_pairs);

  Scalar loss = Scalar(0);
  EncoderTrace<Scalar> trace;
  AttendTrace<Scalar> attn_trace;
  MlpTrace<Scalar> mlp_trace;
  for (const auto& patch : batch) {
    encode_with_trace(patch.lr_patch, params.encoder, trace);
    const FeatureVolume<Scalar>& feature = trace.feature;
    MatrixR<Scalar> d_feature;
    if (grads) d_feature = MatrixR<Scalar>::Zero(feature.data.rows(), feature.data.cols());

    for (std::size_t i = 0; i < patch.coords.size(); ++i) {
      const QueryPoint& q = patch.coords[i];
      const TrilinearStencil stencil = trilinear_stencil(feature.dims, q);
      RowVectorX<Scalar> latent = RowVectorX<Scalar>::Zero(feature.channels());
      Scalar sampled = Scalar(0);
      for (int c = 0; c < 8; ++c) {
        const Scalar w = static_cast<Scalar>(stencil.weight[c]);
        latent += w * feature.data.row(stencil.corner[c]);
        sampled += w * patch.lr_patch.data[stencil.corner[c]];
      }
      const Neighborhood<Scalar> nb = gather_neighborhood(feature, q, window);
      const RowVectorX<Scalar> refined =
          attend(latent, nb, params.attention, grads ? &attn_trace : nullptr);
      const Scalar residual =
          decode_with_trace(refined, params.decoder, grads ? &mlp_trace : nullptr);
      const Scalar err = residual + sampled - patch.targets[static_cast<Index>(i)];
      loss += std::abs(err) * inv_n;
      if (!grads) continue;

      const Scalar d_pred = (err > Scalar(0) ? inv_n : (err < Scalar(0) ? -inv_n : Scalar(0)));
      RowVectorX<Scalar> d_refined = RowVectorX<Scalar>::Zero(refined.cols());
      decode_backward(params.decoder, mlp_trace, d_pred, grads->decoder, d_refined);
      RowVectorX<Scalar> d_latent = RowVectorX<Scalar>::Zero(latent.cols());
      MatrixR<Scalar> d_codes = MatrixR<Scalar>::Zero(nb.codes.rows(), nb.codes.cols());
      attend_backward(latent, nb, params.attention, attn_trace, d_refined, /*with_pos=*/true,
                      d_latent, d_codes, grads->attention);
      for (Index r = 0; r < d_codes.rows(); ++r)
        d_feature.row(nb.sources[static_cast<std::size_t>(r)]) += d_codes.row(r);
      trilinear_scatter(stencil, d_latent, d_feature);
    }
    if (grads) encoder_backward(trace, params.encoder, d_feature, grads->encoder);
  }
  return loss;
}

struct StepRecord {
  int ratio = 0;
  double loss = 0.0;
};

/// One optimization step on a prepared batch. The returned loss is the
/// pre-update value.
template <typename Scalar>
Scalar train_step(ModelParams<Scalar>& params, std::span<const PatchPair<Scalar>> batch,
                  AdamState<Scalar>& opt, long& adam_step, int window, const TrainConfig& cfg) {
  ModelParams<Scalar> grads = zero_like(params);
  const Scalar loss = compute_loss_and_grads(params, window, batch, &grads);
  if (!std::isfinite(static_cast<double>(loss))) {
    std::ostringstream msg;
    msg << "train_step: non-finite loss " << loss << " at adam step " << (adam_step + 1)
        << " (batch of " << batch.size() << ", k=" << (batch.empty() ? 0 : batch.front().ratio)
        << ")";
    throw std::runtime_error(msg.str());
  }
  ++adam_step;
  adam_update(params, grads, opt, adam_step, cfg);
  return loss;
}

/// Owns everything a training run mutates: parameters, optimizer state, the
/// RNG driving batch sampling, and the epoch counter.
template <typename Scalar>
struct Trainer {
  ModelConfig model_config;
  TrainConfig config;
  ModelParams<Scalar> params;
  AdamState<Scalar> opt;
  long adam_step = 0;
  std::mt19937_64 rng;
  long epoch = 0;

  static Trainer make(const ModelConfig& mcfg, const TrainConfig& tcfg) {
    Trainer t;
    t.model_config = mcfg;
    t.config = tcfg;
    t.rng.seed(tcfg.seed);
    // Training starts from the standard random init. Starting exactly at the
    // interpolation baseline (zero output layer / zero value projection) is a
    // stationary point of the L1 objective: the on-grid pairs hold every
    // output coordinate at the per-sample median of zero and Adam dithers
    // there indefinitely.
    t.params = init_model<Scalar>(mcfg, t.rng, /*zero_start=*/false);
    t.opt = make_adam_state(t.params);
    return t;
  }

  StepRecord step(std::span<const Volume<Scalar>> dataset) {
    const std::vector<PatchPair<Scalar>> batch = sample_batch(dataset, config, rng);
    const int ratio = batch.front().ratio;
    const Scalar loss = train_step(params, std::span<const PatchPair<Scalar>>(batch), opt,
                                   adam_step, model_config.window, config);
    return {ratio, static_cast<double>(loss)};
  }
};

/// Run `n_epochs` epochs of config.steps_per_epoch steps each;
/// per_step(epoch, step_in_epoch, record) observes every step.
template <typename Scalar, typename Sink>
void train_epochs(Trainer<Scalar>& trainer, std::span<const Volume<Scalar>> dataset,
                  long n_epochs, Sink&& per_step) {
  for (long e = 0; e < n_epochs; ++e) {
    for (long s = 0; s < trainer.config.steps_per_epoch; ++s) {
      const StepRecord rec = trainer.step(dataset);
      per_step(trainer.epoch, s, rec);
    }
    ++trainer.epoch;
  }
}

struct GradCheckEntry {
  std::string tensor;
  double max_rel_err = 0.0;
  bool pass = false;
};

struct GradCheckReport {
  double tolerance = 0.0;
  bool passed = false;
  std::vector<GradCheckEntry> entries;
};

/// Compare analytic gradients of the full pipeline against central finite
/// differences (step 1e-5), tensor by tensor, in double precision. Failures
/// are reported, not thrown. `corrupt_tensor` deliberately doubles one
/// analytic gradient as a self-test of the checker.
inline GradCheckReport gradient_check(const ModelConfig& cfg, double tolerance,
                                      std::uint64_t seed = 99, GridDims dims = {4, 4, 3},
                                      Index max_queries = 16,
                                      const std::string& corrupt_tensor = {}) {
  using Scalar = double;
  std::mt19937_64 rng(seed);
  ModelParams<Scalar> params = init_model<Scalar>(cfg, rng, /*zero_start=*/false);

  PatchPair<Scalar> patch;
  patch.ratio = 2;
  patch.lr_patch = smooth_random_field<Scalar>(dims, seed + 1);
  const std::vector<QueryPoint> grid = make_query_grid(dims, patch.ratio);
  const std::size_t stride = std::max<std::size_t>(1, grid.size() / static_cast<std::size_t>(max_queries));
  for (std::size_t i = 0; i < grid.size() && patch.coords.size() < static_cast<std::size_t>(max_queries);
       i += stride)
    patch.coords.push_back(grid[i]);
  patch.targets.resize(static_cast<Index>(patch.coords.size()));
  for (Index i = 0; i < patch.targets.size(); ++i) patch.targets[i] = uniform01(rng);

  const std::array<PatchPair<Scalar>, 1> batch = {patch};
  const auto as_span = std::span<const PatchPair<Scalar>>(batch);

  ModelParams<Scalar> grads = zero_like(params);
  compute_loss_and_grads(params, cfg.window, as_span, &grads);
  auto grad_refs = tensor_refs(grads);
  if (!corrupt_tensor.empty()) {
    for (auto& ref : grad_refs)
      if (ref.name == corrupt_tensor) *ref.tensor *= Scalar(2);
  }

  constexpr double step = 1e-5;
  constexpr double floor = 1e-6;
  GradCheckReport report;
  report.tolerance = tolerance;
  report.passed = true;
  auto param_refs = tensor_refs(params);
  for (std::size_t ti = 0; ti < param_refs.size(); ++ti) {
    auto& tensor = *param_refs[ti].tensor;
    const auto& analytic = *grad_refs[ti].tensor;
    double max_rel = 0.0;
    for (Index r = 0; r < tensor.rows(); ++r)
      for (Index c = 0; c < tensor.cols(); ++c) {
        const Scalar saved = tensor(r, c);
        tensor(r, c) = saved + step;
        const double up = compute_loss_and_grads<Scalar>(params, cfg.window, as_span, nullptr);
        tensor(r, c) = saved - step;
        const double down = compute_loss_and_grads<Scalar>(params, cfg.window, as_span, nullptr);
        tensor(r, c) = saved;
        const double fd = (up - down) / (2.0 * step);
        const double a = analytic(r, c);
        const double denom = std::max({std::abs(a), std::abs(fd), floor});
        max_rel = std::max(max_rel, std::abs(a - fd) / denom);
      }
    const bool pass = max_rel < tolerance;
    report.entries.push_back({param_refs[ti].name, max_rel, pass});
    report.passed = report.passed && pass;
  }
  return report;
}

}  // namespace ssr
