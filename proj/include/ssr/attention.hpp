#pragma once

#include "ssr/encoder.hpp"
#include "ssr/sampler.hpp"

#include <cmath>
#include <vector>

namespace ssr {

/// Learned projections for the local windowed attention. All latent codes are
/// rows, so a projection maps rows by right-multiplication.
template <typename Scalar>
struct AttentionWeights {
  MatrixR<Scalar> query_proj;  // C x C
  MatrixR<Scalar> key_proj;    // C x C
  MatrixR<Scalar> value_proj;  // C x C
  MatrixR<Scalar> pos_embed;   // 3 x C, maps relative offsets to latent space
};

/// The 2*l*l latent codes feeding attention for one query: an l x l window on
/// the preceding slice and one on the next. `sources` are the border-clamped
/// grid indices the codes were read from; `offsets` keep the nominal
/// (unclamped) neighbour-minus-query geometry.
template <typename Scalar>
struct Neighborhood {
  MatrixR<Scalar> codes;        // 2l^2 x C
  MatrixR<Scalar> offsets;      // 2l^2 x 3, (dx, dy, dz) in LR index units
  std::vector<Index> sources;   // 2l^2 clamped flat indices
};

/// Window centers come from projecting the query onto the slices bracketing
/// it: preceding = floor(z), next = floor(z) + 1 (clamped at the top edge).
template <typename Scalar>
Neighborhood<Scalar> gather_neighborhood(const FeatureVolume<Scalar>& feature,
                                         const QueryPoint& q, int window) {
  if (window < 1 || window % 2 == 0)
    throw std::invalid_argument("gather_neighborhood: window must be odd and >= 1");
  if (!in_bounds(q, feature.dims))
    throw std::out_of_range("gather_neighborhood: coordinate outside the grid");

  const GridDims& dims = feature.dims;
  const Index half = window / 2;
  const Index rows = 2 * static_cast<Index>(window) * window;
  const double z_floor = std::floor(q.coord[2]);
  const Index cx = static_cast<Index>(std::llround(q.coord[0]));
  const Index cy = static_cast<Index>(std::llround(q.coord[1]));

  Neighborhood<Scalar> nb;
  nb.codes.resize(rows, feature.channels());
  nb.offsets.resize(rows, 3);
  nb.sources.resize(static_cast<std::size_t>(rows));

  Index r = 0;
  for (int slice = 0; slice < 2; ++slice) {
    const double z_nominal = z_floor + slice;
    const Index z = std::min<Index>(static_cast<Index>(z_nominal), dims.depth - 1);
    for (Index ox = -half; ox <= half; ++ox)
      for (Index oy = -half; oy <= half; ++oy, ++r) {
        const Index x = std::clamp<Index>(cx + ox, 0, dims.height - 1);
        const Index y = std::clamp<Index>(cy + oy, 0, dims.width - 1);
        const Index src = dims.flat(x, y, z);
        nb.sources[static_cast<std::size_t>(r)] = src;
        nb.codes.row(r) = feature.data.row(src);
        nb.offsets(r, 0) = static_cast<Scalar>(static_cast<double>(cx + ox) - q.coord[0]);
        nb.offsets(r, 1) = static_cast<Scalar>(static_cast<double>(cy + oy) - q.coord[1]);
        nb.offsets(r, 2) = static_cast<Scalar>(z_nominal - q.coord[2]);
      }
  }
  return nb;
}

/// Intermediates retained for the backward pass.
template <typename Scalar>
struct AttendTrace {
  MatrixR<Scalar> values;         // V = codes (+ offsets * pos_embed)
  MatrixR<Scalar> keys;           // V * key_proj
  RowVectorX<Scalar> query;       // latent * query_proj
  RowVectorX<Scalar> attn;        // softmax weights over rows
  RowVectorX<Scalar> attn_value;  // attn * V
};

namespace detail {

template <typename Scalar>
RowVectorX<Scalar> attend_impl(const RowVectorX<Scalar>& latent, const Neighborhood<Scalar>& nb,
                               const AttentionWeights<Scalar>& w, bool with_pos,
                               AttendTrace<Scalar>* trace) {
  require(latent.cols() == nb.codes.cols() && latent.cols() == w.query_proj.rows(),
          "attend: dims mismatch");
  MatrixR<Scalar> values = nb.codes;
  if (with_pos) values.noalias() += nb.offsets * w.pos_embed;

  const MatrixR<Scalar> keys = values * w.key_proj;
  const RowVectorX<Scalar> query = latent * w.query_proj;
  RowVectorX<Scalar> scores = query * keys.transpose();  // plain dot product, no scaling
  if (!scores.allFinite()) throw std::runtime_error("attend: non-finite attention scores");

  // Softmax with max subtraction.
  scores.array() -= scores.maxCoeff();
  RowVectorX<Scalar> attn = scores.array().exp();
  attn /= attn.sum();

  const RowVectorX<Scalar> attn_value = attn * values;
  RowVectorX<Scalar> out = attn_value * w.value_proj;
  out += latent;
  if (trace) {
    trace->values = std::move(values);
    trace->keys = keys;
    trace->query = query;
    trace->attn = std::move(attn);
    trace->attn_value = attn_value;
  }
  return out;
}

}  // namespace detail

/// Attention update with relative position embedding added to keys and values;
/// the input latent is added back so zeroing value_proj leaves it untouched.
template <typename Scalar>
RowVectorX<Scalar> attend(const RowVectorX<Scalar>& latent, const Neighborhood<Scalar>& nb,
                          const AttentionWeights<Scalar>& w, AttendTrace<Scalar>* trace = nullptr) {
  return detail::attend_impl(latent, nb, w, /*with_pos=*/true, trace);
}

/// Plain variant without the position embedding term.
template <typename Scalar>
RowVectorX<Scalar> attend_no_pos(const RowVectorX<Scalar>& latent, const Neighborhood<Scalar>& nb,
                                 const AttentionWeights<Scalar>& w,
                                 AttendTrace<Scalar>* trace = nullptr) {
  return detail::attend_impl(latent, nb, w, /*with_pos=*/false, trace);
}

/// Gradients of one attention call. `d_offsets` may be null when offsets are
/// pure geometry (training never differentiates them; the checker does).
template <typename Scalar>
void attend_backward(const RowVectorX<Scalar>& latent, const Neighborhood<Scalar>& nb,
                     const AttentionWeights<Scalar>& w, const AttendTrace<Scalar>& t,
                     const RowVectorX<Scalar>& d_out, bool with_pos,
                     RowVectorX<Scalar>& d_latent, MatrixR<Scalar>& d_codes,
                     AttentionWeights<Scalar>& d_weights, MatrixR<Scalar>* d_offsets = nullptr) {
  // out = (attn * V) * value_proj + latent
  d_latent += d_out;
  d_weights.value_proj.noalias() += t.attn_value.transpose() * d_out;
  const RowVectorX<Scalar> d_av = d_out * w.value_proj.transpose();  // d(attn * V)
  RowVectorX<Scalar> d_attn = d_av * t.values.transpose();
  MatrixR<Scalar> d_values = t.attn.transpose() * d_av;

  // softmax: ds = attn .* (d_attn - <d_attn, attn>)
  const Scalar dot = d_attn.dot(t.attn);
  const RowVectorX<Scalar> d_scores =
      (t.attn.array() * (d_attn.array() - dot)).matrix();

  // scores = query * keys^T
  const RowVectorX<Scalar> d_query = d_scores * t.keys;
  const MatrixR<Scalar> d_keys = d_scores.transpose() * t.query;

  // query = latent * query_proj
  d_latent.noalias() += d_query * w.query_proj.transpose();
  d_weights.query_proj.noalias() += latent.transpose() * d_query;

  // keys = V * key_proj
  d_values.noalias() += d_keys * w.key_proj.transpose();
  d_weights.key_proj.noalias() += t.values.transpose() * d_keys;

  // V = codes (+ offsets * pos_embed)
  d_codes += d_values;
  if (with_pos) {
    d_weights.pos_embed.noalias() += nb.offsets.transpose() * d_values;
    if (d_offsets) d_offsets->noalias() += d_values * w.pos_embed.transpose();
  }
}

}  // namespace ssr
