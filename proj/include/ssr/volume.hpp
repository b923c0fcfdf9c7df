#pragma once

#include "ssr/core.hpp"

#include <array>
#include <cmath>
#include <utility>
#include <vector>

namespace ssr {

/// A continuous query location in LR index units; z is the slice axis.
/// The HR slice j at ratio k sits at z = j / k.
struct QueryPoint {
  Eigen::Vector3d coord{0.0, 0.0, 0.0};  // (x, y, z)
};

inline bool in_bounds(const QueryPoint& q, const GridDims& dims) {
  return q.coord[0] >= 0.0 && q.coord[0] <= static_cast<double>(dims.height - 1) &&
         q.coord[1] >= 0.0 && q.coord[1] <= static_cast<double>(dims.width - 1) &&
         q.coord[2] >= 0.0 && q.coord[2] <= static_cast<double>(dims.depth - 1);
}

/// Dense 3D grayscale grid with voxel spacing metadata (mm).
template <typename Scalar>
struct Volume {
  GridDims dims;
  Eigen::Vector3d spacing{1.0, 1.0, 1.0};  // (sx, sy, sz)
  VectorX<Scalar> data;                    // dims.voxels() entries, slice-major

  Scalar& at(Index x, Index y, Index z) { return data[dims.flat(x, y, z)]; }
  Scalar at(Index x, Index y, Index z) const { return data[dims.flat(x, y, z)]; }
};

template <typename Scalar>
Volume<Scalar> make_volume(GridDims dims, Eigen::Vector3d spacing = {1.0, 1.0, 1.0}) {
  Volume<Scalar> v;
  v.dims = dims;
  v.spacing = std::move(spacing);
  v.data = VectorX<Scalar>::Zero(dims.voxels());
  return v;
}

/// Min-max rescale to [0, 1]. A constant volume has no dynamic range to map.
template <typename Scalar>
Volume<Scalar> normalize(const Volume<Scalar>& vol) {
  require(vol.data.size() > 0 && vol.data.size() == vol.dims.voxels(),
          "normalize: dims do not match data length");
  const Scalar lo = vol.data.minCoeff();
  const Scalar hi = vol.data.maxCoeff();
  if (!(hi > lo)) throw std::runtime_error("degenerate dynamic range");
  Volume<Scalar> out = vol;
  out.data = (vol.data.array() - lo) / (hi - lo);
  return out;
}

/// Drop slices, keeping indices {0, k, 2k, ...}. Output depth is
/// floor((D-1)/k) + 1 and slice spacing grows by k.
template <typename Scalar>
Volume<Scalar> simulate_lr(const Volume<Scalar>& vol, int ratio) {
  if (ratio < 1) throw std::invalid_argument("simulate_lr: ratio must be >= 1");
  require(vol.dims.depth >= 1, "simulate_lr: empty volume");
  const GridDims d = vol.dims;
  Volume<Scalar> out;
  out.dims = {d.height, d.width, (d.depth - 1) / ratio + 1};
  out.spacing = {vol.spacing[0], vol.spacing[1], vol.spacing[2] * ratio};
  out.data.resize(out.dims.voxels());
  const Index plane = d.height * d.width;
  for (Index z = 0; z < out.dims.depth; ++z)
    out.data.segment(z * plane, plane) = vol.data.segment(z * ratio * plane, plane);
  return out;
}

/// First `depth` slices of a volume (used to compare reconstructions whose
/// grid covers a prefix of the ground truth).
template <typename Scalar>
Volume<Scalar> restrict_depth(const Volume<Scalar>& vol, Index depth) {
  require(depth >= 1 && depth <= vol.dims.depth, "restrict_depth: bad depth");
  Volume<Scalar> out;
  out.dims = {vol.dims.height, vol.dims.width, depth};
  out.spacing = vol.spacing;
  out.data = vol.data.head(out.dims.voxels());
  return out;
}

/// All reconstruction targets for up-sampling the slice axis of an LR grid by
/// `ratio`: in-plane coordinates stay on-grid, z runs over j/ratio.
/// Points are emitted in slice-major order (z slowest, y fastest) so that
/// point i corresponds to voxel i of the output volume.
inline std::vector<QueryPoint> make_query_grid(const GridDims& lr_dims, int ratio) {
  if (ratio < 1) throw std::invalid_argument("make_query_grid: ratio must be >= 1");
  require(lr_dims.depth >= 2, "make_query_grid: need at least two slices");
  const Index out_depth = (lr_dims.depth - 1) * ratio + 1;
  std::vector<QueryPoint> points;
  points.reserve(static_cast<std::size_t>(lr_dims.height * lr_dims.width * out_depth));
  for (Index j = 0; j < out_depth; ++j) {
    const double z = static_cast<double>(j) / ratio;
    for (Index x = 0; x < lr_dims.height; ++x)
      for (Index y = 0; y < lr_dims.width; ++y)
        points.push_back({{static_cast<double>(x), static_cast<double>(y), z}});
  }
  return points;
}

/// One supervised training example: an LR patch plus every HR voxel of the
/// source region expressed as (coordinate, intensity) pairs in LR index units.
template <typename Scalar>
struct PatchPair {
  Volume<Scalar> lr_patch;
  std::vector<QueryPoint> coords;
  VectorX<Scalar> targets;
  int ratio = 1;
};

/// Crop an HR region of (in_plane, in_plane, (lr_depth-1)*ratio + 1) voxels at
/// `origin` and pair it with its slice-dropped LR counterpart.
template <typename Scalar>
PatchPair<Scalar> crop_patch(const Volume<Scalar>& hr, std::array<Index, 3> origin, int ratio,
                             Index in_plane = 64, Index lr_depth = 17) {
  if (ratio < 1) throw std::invalid_argument("crop_patch: ratio must be >= 1");
  require(in_plane >= 1 && lr_depth >= 2, "crop_patch: bad patch shape");
  const Index hr_depth = (lr_depth - 1) * ratio + 1;
  const auto [x0, y0, z0] = origin;
  if (x0 < 0 || y0 < 0 || z0 < 0 || x0 + in_plane > hr.dims.height ||
      y0 + in_plane > hr.dims.width || z0 + hr_depth > hr.dims.depth)
    throw std::out_of_range("crop_patch: patch does not fit inside the volume");

  PatchPair<Scalar> out;
  out.ratio = ratio;
  out.lr_patch.dims = {in_plane, in_plane, lr_depth};
  out.lr_patch.spacing = {hr.spacing[0], hr.spacing[1], hr.spacing[2] * ratio};
  out.lr_patch.data.resize(out.lr_patch.dims.voxels());
  for (Index z = 0; z < lr_depth; ++z)
    for (Index x = 0; x < in_plane; ++x)
      for (Index y = 0; y < in_plane; ++y)
        out.lr_patch.at(x, y, z) = hr.at(x0 + x, y0 + y, z0 + z * ratio);

  const Index n = in_plane * in_plane * hr_depth;
  out.coords.reserve(static_cast<std::size_t>(n));
  out.targets.resize(n);
  Index i = 0;
  for (Index j = 0; j < hr_depth; ++j) {
    const double z = static_cast<double>(j) / ratio;
    for (Index x = 0; x < in_plane; ++x)
      for (Index y = 0; y < in_plane; ++y, ++i) {
        out.coords.push_back({{static_cast<double>(x), static_cast<double>(y), z}});
        out.targets[i] = hr.at(x0 + x, y0 + y, z0 + j);
      }
  }
  return out;
}

}  // namespace ssr
