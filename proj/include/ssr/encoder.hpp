#pragma once

#include "ssr/volume.hpp"

#include <algorithm>
#include <cstdlib>
#include <vector>

namespace ssr {

/// Per-voxel latent codes; row i of `data` is the C-vector of voxel i in the
/// same slice-major order as Volume.
template <typename Scalar>
struct FeatureVolume {
  GridDims dims;
  MatrixR<Scalar> data;  // voxels x channels

  Index channels() const { return data.cols(); }
};

struct EncoderConfig {
  Index channels = 64;
  Index res_blocks = 16;

  bool operator==(const EncoderConfig&) const = default;
};

/// 3x3x3 convolution, stride 1, zero padding 1. Weight block t holds the
/// (out x in) matrix of tap t; taps are ordered t = ((dz+1)*3 + (dx+1))*3 + (dy+1).
template <typename Scalar>
struct Conv3dParams {
  MatrixR<Scalar> weight;  // out_channels x (27 * in_channels)
  MatrixR<Scalar> bias;    // 1 x out_channels

  Index in_channels() const { return weight.cols() / 27; }
  Index out_channels() const { return weight.rows(); }
};

template <typename Scalar>
struct ResBlockParams {
  Conv3dParams<Scalar> conv1, conv2;
};

template <typename Scalar>
struct EncoderParams {
  Conv3dParams<Scalar> head;  // 1 -> C
  std::vector<ResBlockParams<Scalar>> blocks;
  Conv3dParams<Scalar> tail;  // C -> C
};

namespace detail {

struct TapOffset {
  int dz, dx, dy;
};

inline const std::array<TapOffset, 27>& conv_taps() {
  static const std::array<TapOffset, 27> taps = [] {
    std::array<TapOffset, 27> t{};
    int i = 0;
    for (int dz = -1; dz <= 1; ++dz)
      for (int dx = -1; dx <= 1; ++dx)
        for (int dy = -1; dy <= 1; ++dy) t[i++] = {dz, dx, dy};
    return t;
  }();
  return taps;
}

// Visit every voxel pair (a, b = a + offset) with both ends in bounds, as
// maximal y-contiguous row ranges of the flat (voxels x channels) layout.
template <typename Fn>
void for_each_shifted_run(const GridDims& dims, const TapOffset& o, Fn&& fn) {
  const Index y_lo = std::max<Index>(0, -o.dy);
  const Index y_len = dims.width - std::abs(static_cast<Index>(o.dy));
  if (y_len <= 0) return;
  const Index z_lo = std::max<Index>(0, -o.dz), z_hi = dims.depth - std::max<Index>(0, o.dz);
  const Index x_lo = std::max<Index>(0, -o.dx), x_hi = dims.height - std::max<Index>(0, o.dx);
  for (Index z = z_lo; z < z_hi; ++z)
    for (Index x = x_lo; x < x_hi; ++x)
      fn(dims.flat(x, y_lo, z), dims.flat(x + o.dx, y_lo + o.dy, z + o.dz), y_len);
}

// buf[v] = in[v + offset], zero where the neighbour falls outside the grid.
template <typename Scalar>
void shift_copy(const GridDims& dims, const TapOffset& o, const MatrixR<Scalar>& in,
                MatrixR<Scalar>& buf) {
  buf.setZero(in.rows(), in.cols());
  for_each_shifted_run(dims, o, [&](Index a, Index b, Index len) {
    buf.middleRows(a, len) = in.middleRows(b, len);
  });
}

// dst[v + offset] += src[v] for in-bounds pairs.
template <typename Scalar>
void add_shifted(const GridDims& dims, const TapOffset& o, const MatrixR<Scalar>& src,
                 MatrixR<Scalar>& dst) {
  for_each_shifted_run(dims, o, [&](Index a, Index b, Index len) {
    dst.middleRows(b, len) += src.middleRows(a, len);
  });
}

}  // namespace detail

template <typename Scalar>
void conv3d_forward(const GridDims& dims, const MatrixR<Scalar>& in,
                    const Conv3dParams<Scalar>& p, MatrixR<Scalar>& out) {
  const Index c_in = p.in_channels(), c_out = p.out_channels();
  require(in.cols() == c_in, "conv3d: channel mismatch");
  require(in.rows() == dims.voxels(), "conv3d: voxel count mismatch");
  out.setZero(in.rows(), c_out);
  MatrixR<Scalar> buf;
  const auto& taps = detail::conv_taps();
  for (int t = 0; t < 27; ++t) {
    const auto w_t = p.weight.middleCols(t * c_in, c_in);
    if (taps[t].dz == 0 && taps[t].dx == 0 && taps[t].dy == 0) {
      out.noalias() += in * w_t.transpose();
    } else {
      detail::shift_copy(dims, taps[t], in, buf);
      out.noalias() += buf * w_t.transpose();
    }
  }
  out.rowwise() += p.bias.row(0);
}

template <typename Scalar>
MatrixR<Scalar> conv3d_forward(const GridDims& dims, const MatrixR<Scalar>& in,
                               const Conv3dParams<Scalar>& p) {
  MatrixR<Scalar> out;
  conv3d_forward(dims, in, p, out);
  return out;
}

/// Accumulates parameter gradients into `d_params` and, when `d_in` is given,
/// the input gradient into it (both must be pre-sized and may carry prior sums).
template <typename Scalar>
void conv3d_backward(const GridDims& dims, const MatrixR<Scalar>& in,
                     const Conv3dParams<Scalar>& p, const MatrixR<Scalar>& d_out,
                     Conv3dParams<Scalar>& d_params, MatrixR<Scalar>* d_in) {
  const Index c_in = p.in_channels();
  MatrixR<Scalar> buf;
  const auto& taps = detail::conv_taps();
  for (int t = 0; t < 27; ++t) {
    const auto w_t = p.weight.middleCols(t * c_in, c_in);
    auto dw_t = d_params.weight.middleCols(t * c_in, c_in);
    if (taps[t].dz == 0 && taps[t].dx == 0 && taps[t].dy == 0) {
      dw_t.noalias() += d_out.transpose() * in;
      if (d_in) d_in->noalias() += d_out * w_t;
    } else {
      detail::shift_copy(dims, taps[t], in, buf);
      dw_t.noalias() += d_out.transpose() * buf;
      if (d_in) {
        buf.noalias() = d_out * w_t;
        detail::add_shifted(dims, taps[t], buf, *d_in);
      }
    }
  }
  d_params.bias.row(0) += d_out.colwise().sum();
}

template <typename Scalar>
MatrixR<Scalar> relu(const MatrixR<Scalar>& x) {
  return x.cwiseMax(Scalar(0));
}

/// EDSR-style block: x + conv2(relu(conv1(x))). No normalization layers.
template <typename Scalar>
MatrixR<Scalar> residual_block_forward(const GridDims& dims, const MatrixR<Scalar>& x,
                                       const ResBlockParams<Scalar>& p) {
  const MatrixR<Scalar> a = relu(conv3d_forward(dims, x, p.conv1));
  MatrixR<Scalar> out = conv3d_forward(dims, a, p.conv2);
  out += x;
  return out;
}

/// Activations retained for the backward pass.
template <typename Scalar>
struct EncoderTrace {
  GridDims dims;
  MatrixR<Scalar> input;     // voxels x 1
  MatrixR<Scalar> head_out;  // voxels x C
  struct Block {
    MatrixR<Scalar> in;       // block input
    MatrixR<Scalar> pre_act;  // conv1 output
    MatrixR<Scalar> post_act; // relu(conv1 output), conv2 input
  };
  std::vector<Block> blocks;
  MatrixR<Scalar> tail_in;   // last block output
  FeatureVolume<Scalar> feature;
};

template <typename Scalar>
void encode_with_trace(const Volume<Scalar>& vol, const EncoderParams<Scalar>& p,
                       EncoderTrace<Scalar>& trace) {
  require(vol.data.size() == vol.dims.voxels(), "encode: dims do not match data length");
  trace.dims = vol.dims;
  trace.input = vol.data;  // voxels x 1
  conv3d_forward(vol.dims, trace.input, p.head, trace.head_out);
  trace.blocks.resize(p.blocks.size());
  MatrixR<Scalar> current = trace.head_out;
  for (std::size_t b = 0; b < p.blocks.size(); ++b) {
    auto& t = trace.blocks[b];
    t.in = std::move(current);
    conv3d_forward(vol.dims, t.in, p.blocks[b].conv1, t.pre_act);
    t.post_act = relu(t.pre_act);
    MatrixR<Scalar> branch;
    conv3d_forward(vol.dims, t.post_act, p.blocks[b].conv2, branch);
    current = t.in + branch;
  }
  trace.tail_in = std::move(current);
  MatrixR<Scalar> tail_out;
  conv3d_forward(vol.dims, trace.tail_in, p.tail, tail_out);
  trace.feature.dims = vol.dims;
  trace.feature.data = tail_out + trace.head_out;  // EDSR global skip
}

/// Head conv, res blocks, tail conv, plus a global skip from the head output
/// to the tail output. Spatial dims are preserved throughout.
template <typename Scalar>
FeatureVolume<Scalar> encode(const Volume<Scalar>& vol, const EncoderParams<Scalar>& p) {
  EncoderTrace<Scalar> trace;
  encode_with_trace(vol, p, trace);
  return std::move(trace.feature);
}

/// Backward through the encoder given d(loss)/d(feature). Parameter gradients
/// accumulate into `d_params`; the input gradient is not needed for training.
template <typename Scalar>
void encoder_backward(const EncoderTrace<Scalar>& trace, const EncoderParams<Scalar>& p,
                      const MatrixR<Scalar>& d_feature, EncoderParams<Scalar>& d_params) {
  const GridDims& dims = trace.dims;
  // feature = tail(tail_in) + head_out
  MatrixR<Scalar> d_cur = MatrixR<Scalar>::Zero(d_feature.rows(), d_feature.cols());
  conv3d_backward(dims, trace.tail_in, p.tail, d_feature, d_params.tail, &d_cur);
  for (std::size_t bi = p.blocks.size(); bi-- > 0;) {
    const auto& t = trace.blocks[bi];
    // out = in + conv2(relu(conv1(in)))
    MatrixR<Scalar> d_post = MatrixR<Scalar>::Zero(t.post_act.rows(), t.post_act.cols());
    conv3d_backward(dims, t.post_act, p.blocks[bi].conv2, d_cur, d_params.blocks[bi].conv2,
                    &d_post);
    const MatrixR<Scalar> d_pre =
        ((t.pre_act.array() > Scalar(0)).template cast<Scalar>() * d_post.array()).matrix();
    conv3d_backward(dims, t.in, p.blocks[bi].conv1, d_pre, d_params.blocks[bi].conv1, &d_cur);
  }
  d_cur += d_feature;  // global skip into head_out
  conv3d_backward(dims, trace.input, p.head, d_cur, d_params.head,
                  static_cast<MatrixR<Scalar>*>(nullptr));
}

}  // namespace ssr
