#pragma once

#include "ssr/attention.hpp"
#include "ssr/decoder.hpp"
#include "ssr/encoder.hpp"
#include "ssr/parallel.hpp"
#include "ssr/sampler.hpp"

#include <string>
#include <utility>
#include <vector>

namespace ssr {

struct ModelConfig {
  EncoderConfig encoder;
  DecoderConfig decoder;
  int window = 7;  // attention window side length l, odd

  bool operator==(const ModelConfig&) const = default;
};

/// Every trainable tensor of the pipeline.
template <typename Scalar>
struct ModelParams {
  EncoderParams<Scalar> encoder;
  AttentionWeights<Scalar> attention;
  MlpParams<Scalar> decoder;
};

template <typename Scalar>
struct TensorRef {
  std::string name;
  MatrixR<Scalar>* tensor;
};

/// Stable, ordered view over all parameter tensors; the order defines the
/// checkpoint payload layout and the optimizer state pairing.
template <typename Scalar>
std::vector<TensorRef<Scalar>> tensor_refs(ModelParams<Scalar>& p) {
  std::vector<TensorRef<Scalar>> refs;
  auto add_conv = [&](const std::string& prefix, Conv3dParams<Scalar>& c) {
    refs.push_back({prefix + ".weight", &c.weight});
    refs.push_back({prefix + ".bias", &c.bias});
  };
  add_conv("encoder.head", p.encoder.head);
  for (std::size_t b = 0; b < p.encoder.blocks.size(); ++b) {
    add_conv("encoder.block" + std::to_string(b) + ".conv1", p.encoder.blocks[b].conv1);
    add_conv("encoder.block" + std::to_string(b) + ".conv2", p.encoder.blocks[b].conv2);
  }
  add_conv("encoder.tail", p.encoder.tail);
  refs.push_back({"attention.query_proj", &p.attention.query_proj});
  refs.push_back({"attention.key_proj", &p.attention.key_proj});
  refs.push_back({"attention.value_proj", &p.attention.value_proj});
  refs.push_back({"attention.pos_embed", &p.attention.pos_embed});
  for (std::size_t i = 0; i < p.decoder.weights.size(); ++i) {
    refs.push_back({"decoder.layer" + std::to_string(i) + ".weight", &p.decoder.weights[i]});
    refs.push_back({"decoder.layer" + std::to_string(i) + ".bias", &p.decoder.biases[i]});
  }
  return refs;
}

namespace detail {

template <typename Scalar>
MatrixR<Scalar> uniform_fan_in(Index rows, Index cols, Index fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  MatrixR<Scalar> m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = static_cast<Scalar>(uniform(rng, -bound, bound));
  return m;
}

template <typename Scalar>
Conv3dParams<Scalar> init_conv(Index in_ch, Index out_ch, std::mt19937_64& rng) {
  Conv3dParams<Scalar> c;
  const Index fan_in = 27 * in_ch;
  c.weight = uniform_fan_in<Scalar>(out_ch, 27 * in_ch, fan_in, rng);
  c.bias = uniform_fan_in<Scalar>(1, out_ch, fan_in, rng);
  return c;
}

}  // namespace detail

/// Seeded parameter initialization, uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
/// With `zero_start` the decoder's final layer and the attention value
/// projection start at zero, so the untrained model reproduces plain trilinear
/// interpolation and training begins from that baseline.
template <typename Scalar>
ModelParams<Scalar> init_model(const ModelConfig& cfg, std::mt19937_64& rng,
                               bool zero_start = true) {
  require(cfg.encoder.channels >= 1 && cfg.encoder.res_blocks >= 1, "init_model: bad encoder");
  require(cfg.decoder.layers >= 2, "init_model: bad decoder");
  const Index c = cfg.encoder.channels;
  ModelParams<Scalar> p;
  p.encoder.head = detail::init_conv<Scalar>(1, c, rng);
  p.encoder.blocks.resize(static_cast<std::size_t>(cfg.encoder.res_blocks));
  for (auto& b : p.encoder.blocks) {
    b.conv1 = detail::init_conv<Scalar>(c, c, rng);
    b.conv2 = detail::init_conv<Scalar>(c, c, rng);
  }
  p.encoder.tail = detail::init_conv<Scalar>(c, c, rng);

  p.attention.query_proj = detail::uniform_fan_in<Scalar>(c, c, c, rng);
  p.attention.key_proj = detail::uniform_fan_in<Scalar>(c, c, c, rng);
  p.attention.value_proj = detail::uniform_fan_in<Scalar>(c, c, c, rng);
  p.attention.pos_embed = detail::uniform_fan_in<Scalar>(3, c, 3, rng);

  std::vector<Index> widths;
  widths.push_back(c);
  for (Index i = 0; i + 1 < cfg.decoder.layers; ++i) widths.push_back(cfg.decoder.hidden);
  widths.push_back(1);
  p.decoder.weights.resize(static_cast<std::size_t>(cfg.decoder.layers));
  p.decoder.biases.resize(static_cast<std::size_t>(cfg.decoder.layers));
  for (Index i = 0; i < cfg.decoder.layers; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    p.decoder.weights[ui] =
        detail::uniform_fan_in<Scalar>(widths[ui], widths[ui + 1], widths[ui], rng);
    p.decoder.biases[ui] = detail::uniform_fan_in<Scalar>(1, widths[ui + 1], widths[ui], rng);
  }
  if (zero_start) {
    p.decoder.weights.back().setZero();
    p.decoder.biases.back().setZero();
    p.attention.value_proj.setZero();
  }
  return p;
}

/// Same tensor shapes as `like`, all zero. Used for gradients and Adam state.
template <typename Scalar>
ModelParams<Scalar> zero_like(const ModelParams<Scalar>& like) {
  ModelParams<Scalar> z = like;
  for (auto& ref : tensor_refs(z)) ref.tensor->setZero();
  return z;
}

/// One reconstructed intensity: the decoded residual plus the sampled input
/// intensity, so value - sampled == residual exactly.
template <typename Scalar>
struct Prediction {
  Scalar value;
  Scalar residual;
  Scalar sampled;  // s_q
};

/// Full pipeline for one query: sample latent + intensity, refine by windowed
/// attention, decode the residual, add the sampled intensity back.
template <typename Scalar>
Prediction<Scalar> predict_intensity(const QueryPoint& q, const FeatureVolume<Scalar>& feature,
                                     const Volume<Scalar>& lr, const ModelParams<Scalar>& params,
                                     int window, bool use_attention = true) {
  const LatentSample<Scalar> sample = sample_query(feature, lr, q);
  RowVectorX<Scalar> refined;
  if (use_attention) {
    const Neighborhood<Scalar> nb = gather_neighborhood(feature, q, window);
    refined = attend(sample.latent, nb, params.attention);
  } else {
    refined = sample.latent;
  }
  const Scalar residual = decode(refined, params.decoder);
  return {residual + sample.intensity, residual, sample.intensity};
}

/// Reduce the slice spacing of `lr` by an integer ratio with one shared encode
/// and an independent prediction per output voxel. Output intensities are
/// clamped to [0, 1] at this materialization step only.
template <typename Scalar>
Volume<Scalar> super_resolve(const Volume<Scalar>& lr, int ratio,
                             const ModelParams<Scalar>& params, const ModelConfig& cfg,
                             int threads = 1, bool use_attention = true) {
  if (ratio < 1) throw std::invalid_argument("super_resolve: ratio must be >= 1");
  const FeatureVolume<Scalar> feature = encode(lr, params.encoder);
  const std::vector<QueryPoint> grid = make_query_grid(lr.dims, ratio);

  Volume<Scalar> out;
  out.dims = {lr.dims.height, lr.dims.width, (lr.dims.depth - 1) * ratio + 1};
  out.spacing = {lr.spacing[0], lr.spacing[1], lr.spacing[2] / ratio};
  out.data.resize(out.dims.voxels());
  parallel_for_chunks(static_cast<Index>(grid.size()), threads, [&](Index begin, Index end) {
    for (Index i = begin; i < end; ++i) {
      const Prediction<Scalar> p =
          predict_intensity(grid[static_cast<std::size_t>(i)], feature, lr, params, cfg.window,
                            use_attention);
      out.data[i] = std::clamp(p.value, Scalar(0), Scalar(1));
    }
  });
  return out;
}

}  // namespace ssr
