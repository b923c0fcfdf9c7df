#include "ssr/synthetic.hpp"
#include "ssr/volume.hpp"
#include "ssr/volume_io.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

using namespace ssr;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("normalize maps min/max to 0/1") {
  Volume<double> v = make_volume<double>({3, 1, 1});
  v.data << 0.0, 5.0, 10.0;
  const Volume<double> n = normalize(v);
  CHECK(n.data[0] == 0.0);
  CHECK(n.data[1] == 0.5);
  CHECK(n.data[2] == 1.0);
}

TEST_CASE("normalize is identity on data already spanning [0,1]") {
  Volume<double> v = make_volume<double>({2, 2, 1});
  v.data << 0.0, 1.0, 0.25, 0.75;
  const Volume<double> n = normalize(v);
  CHECK(n.data == v.data);
}

TEST_CASE("normalize preserves order statistics on random data") {
  std::mt19937_64 rng(7);
  const Volume<double> v = oracle::random_volume<double>({5, 4, 3}, rng, -20.0, 35.0);
  const Volume<double> n = normalize(v);
  CHECK(n.data.minCoeff() == 0.0);
  CHECK(n.data.maxCoeff() == 1.0);
  std::vector<Index> order_v(static_cast<std::size_t>(v.data.size()));
  std::iota(order_v.begin(), order_v.end(), Index(0));
  auto order_n = order_v;
  std::sort(order_v.begin(), order_v.end(), [&](Index a, Index b) { return v.data[a] < v.data[b]; });
  std::sort(order_n.begin(), order_n.end(), [&](Index a, Index b) { return n.data[a] < n.data[b]; });
  CHECK(order_v == order_n);
}

TEST_CASE("normalize rejects constant volumes") {
  Volume<double> v = make_volume<double>({2, 2, 2});
  v.data.setConstant(3.0);
  CHECK_THROWS_WITH_AS(static_cast<void>(normalize(v)), "degenerate dynamic range",
                       std::runtime_error);
}

TEST_CASE("simulate_lr with k=1 is the identity") {
  std::mt19937_64 rng(3);
  const Volume<double> v = oracle::random_volume<double>({4, 5, 6}, rng);
  const Volume<double> lr = simulate_lr(v, 1);
  CHECK(lr.dims == v.dims);
  CHECK(lr.data == v.data);
  CHECK(lr.spacing == v.spacing);
}

TEST_CASE("simulate_lr keeps every k-th slice") {
  Volume<double> v = make_volume<double>({1, 1, 9});
  for (Index z = 0; z < 9; ++z) v.at(0, 0, z) = static_cast<double>(z);
  const Volume<double> lr = simulate_lr(v, 2);
  CHECK(lr.dims.depth == 5);
  for (Index z = 0; z < 5; ++z) CHECK(lr.at(0, 0, z) == static_cast<double>(2 * z));
  CHECK(lr.spacing[2] == 2.0);
}

TEST_CASE("simulate_lr at k=4 on D=68 gives 17 slices equal to direct indexing") {
  std::mt19937_64 rng(11);
  const Volume<double> v = oracle::random_volume<double>({3, 3, 68}, rng);
  const Volume<double> lr = simulate_lr(v, 4);
  REQUIRE(lr.dims.depth == 17);
  for (Index z = 0; z < 17; ++z)
    for (Index x = 0; x < 3; ++x)
      for (Index y = 0; y < 3; ++y) CHECK(lr.at(x, y, z) == v.at(x, y, 4 * z));
}

TEST_CASE("simulate_lr rejects k <= 0") {
  const Volume<double> v = make_volume<double>({2, 2, 4});
  CHECK_THROWS_AS(static_cast<void>(simulate_lr(v, 0)), std::invalid_argument);
  CHECK_THROWS_AS(static_cast<void>(simulate_lr(v, -2)), std::invalid_argument);
}

TEST_CASE("simulate_lr composes: (a then b) == a*b when index sets align") {
  std::mt19937_64 rng(5);
  const int a = 2, b = 3, m = 4;
  const Volume<double> v = oracle::random_volume<double>({2, 2, Index(a * b * m + 1)}, rng);
  const Volume<double> two_step = simulate_lr(simulate_lr(v, a), b);
  const Volume<double> one_step = simulate_lr(v, a * b);
  CHECK(two_step.dims == one_step.dims);
  CHECK(two_step.data == one_step.data);
}

TEST_CASE("make_query_grid z values") {
  const auto points = make_query_grid({1, 1, 2}, 2);
  REQUIRE(points.size() == 3);
  CHECK(points[0].coord[2] == 0.0);
  CHECK(points[1].coord[2] == 0.5);
  CHECK(points[2].coord[2] == 1.0);
}

TEST_CASE("make_query_grid with k=1 coincides with the LR grid") {
  const GridDims dims{3, 4, 5};
  const auto points = make_query_grid(dims, 1);
  REQUIRE(static_cast<Index>(points.size()) == dims.voxels());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& c = points[i].coord;
    CHECK(c[0] == std::floor(c[0]));
    CHECK(c[1] == std::floor(c[1]));
    CHECK(c[2] == std::floor(c[2]));
    CHECK(dims.flat(static_cast<Index>(c[0]), static_cast<Index>(c[1]),
                    static_cast<Index>(c[2])) == static_cast<Index>(i));
  }
}

TEST_CASE("make_query_grid count matches enumeration") {
  const GridDims dims{6, 5, 17};
  const auto points = make_query_grid(dims, 3);
  // Enumerate distinct z values directly.
  std::vector<double> zs;
  for (const auto& p : points)
    if (std::find(zs.begin(), zs.end(), p.coord[2]) == zs.end()) zs.push_back(p.coord[2]);
  CHECK(zs.size() == 49);
  CHECK(points.size() == static_cast<std::size_t>(6 * 5 * 49));
  // The LR grid is the subset with integer z.
  std::size_t on_grid = 0;
  for (const auto& p : points)
    if (p.coord[2] == std::floor(p.coord[2])) ++on_grid;
  CHECK(on_grid == static_cast<std::size_t>(dims.voxels()));
}

TEST_CASE("crop_patch with k=1 pairs every voxel at integer z") {
  std::mt19937_64 rng(13);
  const Volume<double> hr = oracle::random_volume<double>({70, 70, 20}, rng);
  const auto patch = crop_patch(hr, {2, 3, 1}, 1);
  CHECK(patch.lr_patch.dims == GridDims{64, 64, 17});
  REQUIRE(patch.coords.size() == static_cast<std::size_t>(64 * 64 * 17));
  for (std::size_t i = 0; i < patch.coords.size(); i += 997) {
    const auto& c = patch.coords[i].coord;
    CHECK(c[2] == std::floor(c[2]));
    CHECK(patch.targets[static_cast<Index>(i)] ==
          patch.lr_patch.at(static_cast<Index>(c[0]), static_cast<Index>(c[1]),
                            static_cast<Index>(c[2])));
  }
}

TEST_CASE("crop_patch pairs at integer z match the LR patch for k=2") {
  std::mt19937_64 rng(17);
  const Volume<double> hr = oracle::random_volume<double>({64, 64, 33}, rng);
  const auto patch = crop_patch(hr, {0, 0, 0}, 2);
  REQUIRE(patch.coords.size() == static_cast<std::size_t>(64 * 64 * 33));
  Index checked = 0;
  for (std::size_t i = 0; i < patch.coords.size(); ++i) {
    const auto& c = patch.coords[i].coord;
    if (c[2] != std::floor(c[2])) continue;
    CHECK(patch.targets[static_cast<Index>(i)] ==
          patch.lr_patch.at(static_cast<Index>(c[0]), static_cast<Index>(c[1]),
                            static_cast<Index>(c[2])));
    ++checked;
  }
  CHECK(checked == 64 * 64 * 17);
}

TEST_CASE("crop_patch HR slice j=2 at k=4 sits at z=0.5") {
  std::mt19937_64 rng(19);
  const Volume<double> hr = oracle::random_volume<double>({8, 8, 70}, rng);
  const auto patch = crop_patch(hr, {0, 0, 0}, 4, 8, 17);
  const Index plane = 8 * 8;
  CHECK(patch.coords[static_cast<std::size_t>(2 * plane)].coord[2] == 0.5);
}

TEST_CASE("crop_patch rejects out-of-bounds origins") {
  const Volume<double> hr = make_volume<double>({70, 70, 40});
  CHECK_THROWS_AS(static_cast<void>(crop_patch(hr, {10, 0, 0}, 2)), std::out_of_range);
  CHECK_THROWS_AS(static_cast<void>(crop_patch(hr, {0, 0, 30}, 2)), std::out_of_range);
  CHECK_THROWS_AS(static_cast<void>(crop_patch(hr, {-1, 0, 0}, 2)), std::out_of_range);
}

TEST_CASE("SRV1 round-trip is bit-exact") {
  std::mt19937_64 rng(23);
  Volume<float> v = oracle::random_volume<float>({4, 3, 5}, rng);
  v.spacing = {0.7, 0.7, 3.5};
  const std::string path = temp_path("ssr_roundtrip.srv");
  save_volume(v, path);
  const Volume<float> r = load_volume<float>(path);
  CHECK(r.dims == v.dims);
  CHECK(r.data == v.data);
  CHECK(r.spacing[2] == doctest::Approx(3.5).epsilon(1e-7));
  std::remove(path.c_str());
}

TEST_CASE("SRV1 float payload survives a double-precision round trip") {
  std::mt19937_64 rng(29);
  const Volume<float> v = oracle::random_volume<float>({3, 3, 3}, rng);
  const std::string path = temp_path("ssr_roundtrip_double.srv");
  save_volume(v, path);
  const Volume<double> d = load_volume<double>(path);
  save_volume(d, path);
  const Volume<float> r = load_volume<float>(path);
  CHECK(r.data == v.data);
  std::remove(path.c_str());
}

TEST_CASE("SRV1 rejects a wrong magic") {
  const std::string path = temp_path("ssr_badmagic.srv");
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOPE" << std::string(56, '\0');
  }
  CHECK_THROWS_WITH_AS(static_cast<void>(load_volume<float>(path)),
                       doctest::Contains("not an SRV1 file"), std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("a 2x2x2 SRV1 file is exactly 60 bytes") {
  Volume<float> v = make_volume<float>({2, 2, 2});
  const std::string path = temp_path("ssr_size.srv");
  save_volume(v, path);
  CHECK(std::filesystem::file_size(path) == 60);
  std::remove(path.c_str());
}

TEST_CASE("SRV1 rejects truncated payloads and oversized dims") {
  const std::string path = temp_path("ssr_truncated.srv");
  Volume<float> v = make_volume<float>({2, 2, 2});
  save_volume(v, path);
  std::filesystem::resize_file(path, 50);
  CHECK_THROWS_WITH_AS(static_cast<void>(load_volume<float>(path)),
                       doctest::Contains("truncated"), std::runtime_error);
  {
    // Declared dims far larger than the payload.
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write("SRV1", 4);
    const std::uint32_t dims[3] = {0xFFFFFFFFu, 0xFFFFFFFFu, 0xFFFFFFFFu};
    out.write(reinterpret_cast<const char*>(dims), 12);
    const float spacing[3] = {1.f, 1.f, 1.f};
    out.write(reinterpret_cast<const char*>(spacing), 12);
  }
  CHECK_THROWS_AS(static_cast<void>(load_volume<float>(path)), std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("restrict_depth keeps a bit-exact slice prefix") {
  std::mt19937_64 rng(31);
  const Volume<double> v = oracle::random_volume<double>({3, 4, 7}, rng);
  const Volume<double> r = restrict_depth(v, 4);
  CHECK(r.dims == GridDims{3, 4, 4});
  CHECK(r.data == v.data.head(3 * 4 * 4));
}

TEST_CASE("smooth_random_field is normalized and deterministic") {
  const auto a = smooth_random_field<double>({8, 8, 9}, 42);
  const auto b = smooth_random_field<double>({8, 8, 9}, 42);
  CHECK(a.data == b.data);
  CHECK(a.data.minCoeff() == 0.0);
  CHECK(a.data.maxCoeff() == 1.0);
}
