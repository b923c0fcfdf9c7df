#pragma once

#include "ssr/encoder.hpp"
#include "ssr/volume.hpp"

namespace ssr {

/// The 8-corner interpolation stencil of a continuous coordinate. Queries on
/// the upper grid boundary use the last cell with fractional part 1, so grid
/// endpoints are valid targets; anything outside the grid is rejected.
struct TrilinearStencil {
  std::array<Index, 8> corner{};     // flat voxel indices
  std::array<double, 8> weight{};    // per-corner weights, sum to 1
};

inline TrilinearStencil trilinear_stencil(const GridDims& dims, const QueryPoint& q) {
  if (!in_bounds(q, dims))
    throw std::out_of_range("trilinear_stencil: coordinate outside the grid");
  Index cell[3];
  double frac[3];
  const Index extent[3] = {dims.height, dims.width, dims.depth};
  for (int a = 0; a < 3; ++a) {
    const double v = q.coord[a];
    Index c = static_cast<Index>(std::floor(v));
    if (c > extent[a] - 2) c = std::max<Index>(0, extent[a] - 2);
    cell[a] = c;
    frac[a] = v - static_cast<double>(c);
  }
  TrilinearStencil s;
  int i = 0;
  for (int cz = 0; cz < 2; ++cz)
    for (int cx = 0; cx < 2; ++cx)
      for (int cy = 0; cy < 2; ++cy, ++i) {
        const Index x = std::min(cell[0] + cx, extent[0] - 1);
        const Index y = std::min(cell[1] + cy, extent[1] - 1);
        const Index z = std::min(cell[2] + cz, extent[2] - 1);
        s.corner[i] = dims.flat(x, y, z);
        s.weight[i] = (cx ? frac[0] : 1.0 - frac[0]) * (cy ? frac[1] : 1.0 - frac[1]) *
                      (cz ? frac[2] : 1.0 - frac[2]);
      }
  return s;
}

/// Trilinear interpolation of a scalar field over the 8 nearest grid points.
template <typename Scalar>
Scalar trilinear_sample(const Volume<Scalar>& vol, const QueryPoint& q) {
  const TrilinearStencil s = trilinear_stencil(vol.dims, q);
  Scalar value = Scalar(0);
  for (int i = 0; i < 8; ++i) value += static_cast<Scalar>(s.weight[i]) * vol.data[s.corner[i]];
  return value;
}

/// Trilinear interpolation of a latent field; returns the C-vector at q.
template <typename Scalar>
RowVectorX<Scalar> trilinear_sample(const FeatureVolume<Scalar>& f, const QueryPoint& q) {
  const TrilinearStencil s = trilinear_stencil(f.dims, q);
  RowVectorX<Scalar> value = RowVectorX<Scalar>::Zero(f.channels());
  for (int i = 0; i < 8; ++i) value += static_cast<Scalar>(s.weight[i]) * f.data.row(s.corner[i]);
  return value;
}

/// Latent code and input intensity sampled at one query coordinate.
template <typename Scalar>
struct LatentSample {
  RowVectorX<Scalar> latent;  // z_q
  Scalar intensity;           // s_q
  QueryPoint coord;
};

template <typename Scalar>
LatentSample<Scalar> sample_query(const FeatureVolume<Scalar>& feature, const Volume<Scalar>& lr,
                                  const QueryPoint& q) {
  require(feature.dims == lr.dims, "sample_query: feature/volume dims mismatch");
  return {trilinear_sample(feature, q), trilinear_sample(lr, q), q};
}

/// Scatter a latent gradient back to the stencil corners of the feature grid.
template <typename Scalar>
void trilinear_scatter(const TrilinearStencil& s, const RowVectorX<Scalar>& d_value,
                       MatrixR<Scalar>& d_feature) {
  for (int i = 0; i < 8; ++i)
    d_feature.row(s.corner[i]) += static_cast<Scalar>(s.weight[i]) * d_value;
}

}  // namespace ssr
