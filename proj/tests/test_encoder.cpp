#include "ssr/encoder.hpp"
#include "ssr/model.hpp"
#include "ssr/synthetic.hpp"

#include "oracles.hpp"

#include <doctest.h>

using namespace ssr;

namespace {

// All-zero conv of the given fan-in/out.
template <typename S>
Conv3dParams<S> zero_conv(Index in_ch, Index out_ch) {
  Conv3dParams<S> c;
  c.weight = MatrixR<S>::Zero(out_ch, 27 * in_ch);
  c.bias = MatrixR<S>::Zero(1, out_ch);
  return c;
}

// Center tap = identity matrix, everything else zero.
template <typename S>
Conv3dParams<S> identity_conv(Index channels) {
  Conv3dParams<S> c = zero_conv<S>(channels, channels);
  constexpr int center = 13;  // ((0+1)*3 + (0+1))*3 + (0+1)
  c.weight.middleCols(center * channels, channels) =
      MatrixR<S>::Identity(channels, channels);
  return c;
}

}  // namespace

TEST_CASE("conv3d with an identity kernel reproduces its input") {
  std::mt19937_64 rng(101);
  const GridDims dims{4, 5, 3};
  const MatrixR<double> in = oracle::random_matrix<double>(dims.voxels(), 3, rng);
  const MatrixR<double> out = conv3d_forward(dims, in, identity_conv<double>(3));
  CHECK(out == in);
}

TEST_CASE("all-ones kernel on a constant input sums 27 taps at interior voxels") {
  const GridDims dims{5, 5, 5};
  const double c = 0.3;
  MatrixR<double> in = MatrixR<double>::Constant(dims.voxels(), 1, c);
  Conv3dParams<double> p;
  p.weight = MatrixR<double>::Ones(1, 27);
  p.bias = MatrixR<double>::Zero(1, 1);
  const MatrixR<double> out = conv3d_forward(dims, in, p);
  CHECK(out(dims.flat(2, 2, 2), 0) == doctest::Approx(27.0 * c).epsilon(1e-14));
}

TEST_CASE("conv3d matches the six-nested-loop oracle on random input") {
  std::mt19937_64 rng(103);
  for (int trial = 0; trial < 20; ++trial) {
    const GridDims dims{4, 4, 4};
    const Index c_in = 1 + static_cast<Index>(trial % 3);
    const Index c_out = 1 + static_cast<Index>((trial + 1) % 3);
    const MatrixR<double> in = oracle::random_matrix<double>(dims.voxels(), c_in, rng);
    Conv3dParams<double> p;
    p.weight = oracle::random_matrix<double>(c_out, 27 * c_in, rng);
    p.bias = oracle::random_matrix<double>(1, c_out, rng);
    const MatrixR<double> got = conv3d_forward(dims, in, p);
    const MatrixR<double> want = oracle::conv3d(dims, in, p);
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("conv3d rejects channel mismatches") {
  const GridDims dims{3, 3, 3};
  const MatrixR<double> in = MatrixR<double>::Zero(dims.voxels(), 2);
  auto p = zero_conv<double>(3, 2);
  CHECK_THROWS_AS(static_cast<void>(conv3d_forward(dims, in, p)), std::runtime_error);
}

TEST_CASE("conv3d is linear in the weights") {
  std::mt19937_64 rng(107);
  const GridDims dims{3, 4, 3};
  const MatrixR<double> in = oracle::random_matrix<double>(dims.voxels(), 2, rng);
  Conv3dParams<double> p1, p2, combo;
  p1.weight = oracle::random_matrix<double>(2, 54, rng);
  p2.weight = oracle::random_matrix<double>(2, 54, rng);
  p1.bias = MatrixR<double>::Zero(1, 2);
  p2.bias = MatrixR<double>::Zero(1, 2);
  const double a = 0.7, b = -1.3;
  combo.weight = a * p1.weight + b * p2.weight;
  combo.bias = MatrixR<double>::Zero(1, 2);
  const MatrixR<double> lhs = conv3d_forward(dims, in, combo);
  const MatrixR<double> rhs =
      a * conv3d_forward(dims, in, p1) + b * conv3d_forward(dims, in, p2);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("residual block with a zero second conv is the identity") {
  std::mt19937_64 rng(109);
  const GridDims dims{3, 3, 4};
  const MatrixR<double> x = oracle::random_matrix<double>(dims.voxels(), 2, rng);
  ResBlockParams<double> block;
  block.conv1.weight = oracle::random_matrix<double>(2, 54, rng);
  block.conv1.bias = oracle::random_matrix<double>(1, 2, rng);
  block.conv2 = zero_conv<double>(2, 2);
  CHECK(residual_block_forward(dims, x, block) == x);
}

TEST_CASE("residual block maps zero input with zero biases to zero") {
  std::mt19937_64 rng(113);
  const GridDims dims{3, 3, 3};
  const MatrixR<double> x = MatrixR<double>::Zero(dims.voxels(), 2);
  ResBlockParams<double> block;
  block.conv1.weight = oracle::random_matrix<double>(2, 54, rng);
  block.conv1.bias = MatrixR<double>::Zero(1, 2);
  block.conv2.weight = oracle::random_matrix<double>(2, 54, rng);
  block.conv2.bias = MatrixR<double>::Zero(1, 2);
  CHECK(residual_block_forward(dims, x, block).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("residual block agrees with composing the conv oracle") {
  std::mt19937_64 rng(127);
  const GridDims dims{3, 4, 3};
  const MatrixR<double> x = oracle::random_matrix<double>(dims.voxels(), 3, rng);
  ResBlockParams<double> block;
  block.conv1.weight = oracle::random_matrix<double>(3, 81, rng);
  block.conv1.bias = oracle::random_matrix<double>(1, 3, rng);
  block.conv2.weight = oracle::random_matrix<double>(3, 81, rng);
  block.conv2.bias = oracle::random_matrix<double>(1, 3, rng);
  const MatrixR<double> got = residual_block_forward(dims, x, block);
  const MatrixR<double> rectified = oracle::conv3d(dims, x, block.conv1).cwiseMax(0.0);
  const MatrixR<double> want = x + oracle::conv3d(dims, rectified, block.conv2);
  CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("encode with identity-center kernels scales non-negative input by 2^blocks + 1") {
  // With every conv an identity and input >= 0, each block doubles its input
  // (x + relu(x) = 2x) and the global skip adds the head output once.
  for (Index n_blocks : {Index(1), Index(2)}) {
    EncoderParams<double> enc;
    enc.head = identity_conv<double>(1);
    enc.blocks.assign(static_cast<std::size_t>(n_blocks),
                      {identity_conv<double>(1), identity_conv<double>(1)});
    enc.tail = identity_conv<double>(1);
    const Volume<double> vol = smooth_random_field<double>({4, 4, 3}, 5);
    const FeatureVolume<double> f = encode(vol, enc);
    const double scale = std::pow(2.0, static_cast<double>(n_blocks)) + 1.0;
    CHECK((f.data.col(0) - scale * vol.data).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("encode preserves spatial dims and channel count") {
  std::mt19937_64 rng(131);
  const ModelConfig cfg{{6, 2}, {3, 8}, 3};
  const ModelParams<double> params = init_model<double>(cfg, rng, false);
  const Volume<double> vol = smooth_random_field<double>({8, 8, 5}, 6);
  const FeatureVolume<double> f = encode(vol, params.encoder);
  CHECK(f.dims == vol.dims);
  CHECK(f.channels() == 6);
  CHECK(f.data.allFinite());
}

TEST_CASE("encode is deterministic") {
  std::mt19937_64 rng(137);
  const ModelConfig cfg{{4, 2}, {3, 8}, 3};
  const ModelParams<double> params = init_model<double>(cfg, rng, false);
  const Volume<double> vol = smooth_random_field<double>({5, 6, 4}, 7);
  const FeatureVolume<double> a = encode(vol, params.encoder);
  const FeatureVolume<double> b = encode(vol, params.encoder);
  CHECK(a.data == b.data);
}

TEST_CASE("conv3d backward matches finite differences") {
  std::mt19937_64 rng(139);
  const GridDims dims{3, 3, 3};
  const MatrixR<double> in = oracle::random_matrix<double>(dims.voxels(), 2, rng);
  Conv3dParams<double> p;
  p.weight = oracle::random_matrix<double>(2, 54, rng);
  p.bias = oracle::random_matrix<double>(1, 2, rng);
  const MatrixR<double> d_out = oracle::random_matrix<double>(dims.voxels(), 2, rng);

  Conv3dParams<double> d_p;
  d_p.weight = MatrixR<double>::Zero(2, 54);
  d_p.bias = MatrixR<double>::Zero(1, 2);
  MatrixR<double> d_in = MatrixR<double>::Zero(dims.voxels(), 2);
  conv3d_backward(dims, in, p, d_out, d_p, &d_in);

  const auto loss = [&](const MatrixR<double>& input, const Conv3dParams<double>& params) {
    return (conv3d_forward(dims, input, params).array() * d_out.array()).sum();
  };
  const double h = 1e-6;
  for (Index r = 0; r < p.weight.rows(); ++r)
    for (Index c = 0; c < p.weight.cols(); c += 7) {
      Conv3dParams<double> up = p, down = p;
      up.weight(r, c) += h;
      down.weight(r, c) -= h;
      const double fd = (loss(in, up) - loss(in, down)) / (2 * h);
      CHECK(d_p.weight(r, c) == doctest::Approx(fd).epsilon(1e-5));
    }
  for (Index v = 0; v < in.rows(); v += 5)
    for (Index c = 0; c < in.cols(); ++c) {
      MatrixR<double> up = in, down = in;
      up(v, c) += h;
      down(v, c) -= h;
      const double fd = (loss(up, p) - loss(down, p)) / (2 * h);
      CHECK(d_in(v, c) == doctest::Approx(fd).epsilon(1e-5));
    }
}
