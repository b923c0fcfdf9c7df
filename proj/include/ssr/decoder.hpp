#pragma once

#include "ssr/core.hpp"

#include <vector>

namespace ssr {

struct DecoderConfig {
  Index layers = 5;     // affine layers; rectifier after all but the last
  Index hidden = 256;   // desk-scale configs override this downwards

  bool operator==(const DecoderConfig&) const = default;
};

/// MLP weights; layer i maps row vectors by x * weights[i] + biases[i].
template <typename Scalar>
struct MlpParams {
  std::vector<MatrixR<Scalar>> weights;  // in x out each
  std::vector<MatrixR<Scalar>> biases;   // 1 x out each

  Index layers() const { return static_cast<Index>(weights.size()); }
};

template <typename Scalar>
struct MlpTrace {
  std::vector<RowVectorX<Scalar>> inputs;  // inputs[i] feeds layer i
  std::vector<RowVectorX<Scalar>> pre;     // pre-activation outputs
};

template <typename Scalar>
Scalar decode_with_trace(const RowVectorX<Scalar>& latent, const MlpParams<Scalar>& p,
                         MlpTrace<Scalar>* trace) {
  const Index n = p.layers();
  require(n >= 2, "decode: need at least two layers");
  if (trace) {
    trace->inputs.assign(static_cast<std::size_t>(n), {});
    trace->pre.assign(static_cast<std::size_t>(n), {});
  }
  RowVectorX<Scalar> h = latent;
  for (Index i = 0; i < n; ++i) {
    require(h.cols() == p.weights[static_cast<std::size_t>(i)].rows(), "decode: shape mismatch");
    if (trace) trace->inputs[static_cast<std::size_t>(i)] = h;
    RowVectorX<Scalar> z = h * p.weights[static_cast<std::size_t>(i)];
    z += p.biases[static_cast<std::size_t>(i)];
    if (trace) trace->pre[static_cast<std::size_t>(i)] = z;
    h = (i + 1 < n) ? z.cwiseMax(Scalar(0)).eval() : z;
  }
  require(h.cols() == 1, "decode: final layer must map to a scalar");
  return h(0);
}

/// Maps a refined latent code to a scalar intensity residual.
template <typename Scalar>
Scalar decode(const RowVectorX<Scalar>& latent, const MlpParams<Scalar>& p) {
  return decode_with_trace(latent, p, static_cast<MlpTrace<Scalar>*>(nullptr));
}

template <typename Scalar>
void decode_backward(const MlpParams<Scalar>& p, const MlpTrace<Scalar>& t, Scalar d_out,
                     MlpParams<Scalar>& d_params, RowVectorX<Scalar>& d_latent) {
  const Index n = p.layers();
  RowVectorX<Scalar> d_h = RowVectorX<Scalar>::Constant(1, d_out);
  for (Index i = n; i-- > 0;) {
    const auto ui = static_cast<std::size_t>(i);
    if (i + 1 < n)  // rectifier applied after this layer on the forward pass
      d_h = (d_h.array() * (t.pre[ui].array() > Scalar(0)).template cast<Scalar>()).matrix();
    d_params.weights[ui].noalias() += t.inputs[ui].transpose() * d_h;
    d_params.biases[ui] += d_h;
    d_h = (d_h * p.weights[ui].transpose()).eval();
  }
  d_latent += d_h;
}

}  // namespace ssr
