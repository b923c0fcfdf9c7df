#pragma once

#include "ssr/volume.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ssr {

namespace detail {

// Raw SRV1 payload: magic "SRV1", three u32 dims (H, W, D), three f32
// spacings, then H*W*D f32 intensities, slice-major. Little-endian throughout.
struct Srv1Data {
  std::array<std::uint32_t, 3> dims{};
  std::array<float, 3> spacing{};
  std::vector<float> values;
};

Srv1Data srv1_read(const std::string& path);
void srv1_write(const std::string& path, const Srv1Data& raw);

}  // namespace detail

template <typename Scalar>
Volume<Scalar> load_volume(const std::string& path) {
  const detail::Srv1Data raw = detail::srv1_read(path);
  Volume<Scalar> vol;
  vol.dims = {static_cast<Index>(raw.dims[0]), static_cast<Index>(raw.dims[1]),
              static_cast<Index>(raw.dims[2])};
  vol.spacing = {raw.spacing[0], raw.spacing[1], raw.spacing[2]};
  vol.data.resize(vol.dims.voxels());
  for (Index i = 0; i < vol.data.size(); ++i)
    vol.data[i] = static_cast<Scalar>(raw.values[static_cast<std::size_t>(i)]);
  return vol;
}

template <typename Scalar>
void save_volume(const Volume<Scalar>& vol, const std::string& path) {
  require(vol.data.size() == vol.dims.voxels(), "save_volume: dims do not match data length");
  require(vol.dims.height > 0 && vol.dims.width > 0 && vol.dims.depth > 0,
          "save_volume: dims must be positive");
  detail::Srv1Data raw;
  raw.dims = {static_cast<std::uint32_t>(vol.dims.height),
              static_cast<std::uint32_t>(vol.dims.width),
              static_cast<std::uint32_t>(vol.dims.depth)};
  raw.spacing = {static_cast<float>(vol.spacing[0]), static_cast<float>(vol.spacing[1]),
                 static_cast<float>(vol.spacing[2])};
  raw.values.resize(static_cast<std::size_t>(vol.data.size()));
  for (Index i = 0; i < vol.data.size(); ++i)
    raw.values[static_cast<std::size_t>(i)] = static_cast<float>(vol.data[i]);
  detail::srv1_write(path, raw);
}

}  // namespace ssr
