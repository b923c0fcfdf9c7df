#pragma once

#include "ssr/volume.hpp"

namespace ssr {

/// Band-limited smooth random field: a sum of random low-frequency cosine
/// modes, min-max normalized to [0, 1]. `max_cycles_per_voxel` bounds the
/// per-axis frequency content.
template <typename Scalar>
Volume<Scalar> smooth_random_field(GridDims dims, std::uint64_t seed, int modes = 8,
                                   double max_cycles_per_voxel = 0.15) {
  require(modes >= 1, "smooth_random_field: need at least one mode");
  std::mt19937_64 rng(seed);
  Volume<double> field = make_volume<double>(dims);
  constexpr double two_pi = 6.283185307179586476925286766559;
  for (int m = 0; m < modes; ++m) {
    const double wx = uniform(rng, -max_cycles_per_voxel, max_cycles_per_voxel) * two_pi;
    const double wy = uniform(rng, -max_cycles_per_voxel, max_cycles_per_voxel) * two_pi;
    const double wz = uniform(rng, -max_cycles_per_voxel, max_cycles_per_voxel) * two_pi;
    const double phase = uniform(rng, 0.0, two_pi);
    const double amp = uniform(rng, 0.5, 1.0);
    for (Index z = 0; z < dims.depth; ++z)
      for (Index x = 0; x < dims.height; ++x)
        for (Index y = 0; y < dims.width; ++y)
          field.at(x, y, z) += amp * std::cos(wx * x + wy * y + wz * z + phase);
  }
  field = normalize(field);
  Volume<Scalar> out;
  out.dims = dims;
  out.spacing = field.spacing;
  out.data = field.data.template cast<Scalar>();
  return out;
}

}  // namespace ssr
