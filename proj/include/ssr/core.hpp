#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace ssr {

using Index = Eigen::Index;

template <typename Scalar>
using MatrixR = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

/// Spatial extent of a voxel grid. Coordinates are (x, y, z) with
/// x in [0, height), y in [0, width), z in [0, depth); z is the slice axis.
struct GridDims {
  Index height = 0;
  Index width = 0;
  Index depth = 0;

  Index voxels() const { return height * width * depth; }

  // Slice-major layout: z slowest, y fastest, so slice planes are contiguous.
  Index flat(Index x, Index y, Index z) const { return (z * height + x) * width + y; }

  bool operator==(const GridDims&) const = default;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::runtime_error(msg);
}

// Deterministic uniform draws. std::uniform_real_distribution is
// implementation-defined, so reproducible code paths must not use it.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

inline Index uniform_index(std::mt19937_64& rng, Index n) {
  // Callers draw from tiny ranges; modulo bias is negligible at 64 bits.
  return static_cast<Index>(rng() % static_cast<std::uint64_t>(n));
}

}  // namespace ssr
