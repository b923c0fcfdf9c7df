#pragma once

#include "ssr/sampler.hpp"
#include "ssr/volume.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace ssr {

/// Peak signal-to-noise ratio in dB; identical volumes map to +infinity.
template <typename Scalar>
double psnr(const Volume<Scalar>& a, const Volume<Scalar>& b, double peak = 1.0) {
  require(a.dims == b.dims, "psnr: dims mismatch");
  require(a.data.size() > 0, "psnr: empty volumes");
  const double mse =
      (a.data - b.data).template cast<double>().squaredNorm() / static_cast<double>(a.data.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

namespace detail {

inline std::vector<double> gaussian_kernel_1d(int radius, double sigma) {
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += k[static_cast<std::size_t>(i + radius)];
  }
  for (auto& v : k) v /= sum;
  return k;
}

// Separable 1-D convolution along one axis; only voxels whose window is fully
// inside along already-filtered axes carry meaningful values, which is all the
// valid-region SSIM below ever reads.
inline void gaussian_pass(const GridDims& dims, int axis, const std::vector<double>& kernel,
                          const Eigen::VectorXd& in, Eigen::VectorXd& out) {
  const int radius = static_cast<int>(kernel.size() / 2);
  const Index extent[3] = {dims.height, dims.width, dims.depth};
  out.setZero(in.size());
  for (Index z = 0; z < dims.depth; ++z)
    for (Index x = 0; x < dims.height; ++x)
      for (Index y = 0; y < dims.width; ++y) {
        Index c[3] = {x, y, z};
        if (c[axis] < radius || c[axis] > extent[axis] - 1 - radius) continue;
        double acc = 0.0;
        for (int t = -radius; t <= radius; ++t) {
          Index n[3] = {x, y, z};
          n[axis] += t;
          acc += kernel[static_cast<std::size_t>(t + radius)] * in[dims.flat(n[0], n[1], n[2])];
        }
        out[dims.flat(x, y, z)] = acc;
      }
}

inline Eigen::VectorXd gaussian_filter(const GridDims& dims, const std::vector<double>& kernel,
                                       const Eigen::VectorXd& in) {
  Eigen::VectorXd a, b;
  gaussian_pass(dims, 2, kernel, in, a);
  gaussian_pass(dims, 0, kernel, a, b);
  gaussian_pass(dims, 1, kernel, b, a);
  return a;
}

}  // namespace detail

/// Structural similarity index with an 11x11x11 Gaussian window (sigma 1.5),
/// K1 = 0.01, K2 = 0.03, dynamic range 1, averaged over voxels whose window
/// lies fully inside the volume.
template <typename Scalar>
double ssim(const Volume<Scalar>& a, const Volume<Scalar>& b) {
  require(a.dims == b.dims, "ssim: dims mismatch");
  constexpr int radius = 5;
  if (a.dims.height < 2 * radius + 1 || a.dims.width < 2 * radius + 1 ||
      a.dims.depth < 2 * radius + 1)
    throw std::invalid_argument("ssim: volume smaller than the 11^3 window");
  constexpr double c1 = 0.01 * 0.01;  // (K1 * L)^2
  constexpr double c2 = 0.03 * 0.03;  // (K2 * L)^2
  const std::vector<double> kernel = detail::gaussian_kernel_1d(radius, 1.5);

  const Eigen::VectorXd va = a.data.template cast<double>();
  const Eigen::VectorXd vb = b.data.template cast<double>();
  const GridDims& dims = a.dims;
  const Eigen::VectorXd mu_a = detail::gaussian_filter(dims, kernel, va);
  const Eigen::VectorXd mu_b = detail::gaussian_filter(dims, kernel, vb);
  const Eigen::VectorXd e_aa = detail::gaussian_filter(dims, kernel, va.cwiseProduct(va));
  const Eigen::VectorXd e_bb = detail::gaussian_filter(dims, kernel, vb.cwiseProduct(vb));
  const Eigen::VectorXd e_ab = detail::gaussian_filter(dims, kernel, va.cwiseProduct(vb));

  double sum = 0.0;
  Index count = 0;
  for (Index z = radius; z < dims.depth - radius; ++z)
    for (Index x = radius; x < dims.height - radius; ++x)
      for (Index y = radius; y < dims.width - radius; ++y) {
        const Index i = dims.flat(x, y, z);
        const double ma = mu_a[i], mb = mu_b[i];
        const double var_a = e_aa[i] - ma * ma;
        const double var_b = e_bb[i] - mb * mb;
        const double cov = e_ab[i] - ma * mb;
        sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) /
               ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
        ++count;
      }
  return sum / static_cast<double>(count);
}

/// Plain trilinear up-sampling of the slice axis on the same query grid the
/// model uses; the reference method every reconstruction must beat.
template <typename Scalar>
Volume<Scalar> interpolation_baseline(const Volume<Scalar>& lr, int ratio) {
  if (ratio < 1) throw std::invalid_argument("interpolation_baseline: ratio must be >= 1");
  const std::vector<QueryPoint> grid = make_query_grid(lr.dims, ratio);
  Volume<Scalar> out;
  out.dims = {lr.dims.height, lr.dims.width, (lr.dims.depth - 1) * ratio + 1};
  out.spacing = {lr.spacing[0], lr.spacing[1], lr.spacing[2] / ratio};
  out.data.resize(out.dims.voxels());
  for (Index i = 0; i < out.data.size(); ++i) {
    const Scalar v = trilinear_sample(lr, grid[static_cast<std::size_t>(i)]);
    out.data[i] = std::clamp(v, Scalar(0), Scalar(1));
  }
  return out;
}

/// Voxel-wise absolute difference.
template <typename Scalar>
Volume<Scalar> error_map(const Volume<Scalar>& pred, const Volume<Scalar>& gt) {
  require(pred.dims == gt.dims, "error_map: dims mismatch");
  Volume<Scalar> out = pred;
  out.data = (pred.data - gt.data).cwiseAbs();
  return out;
}

struct EvalEntry {
  std::string method;
  int ratio = 0;
  std::string volume;
  double psnr_db = 0.0;
  double ssim_value = 0.0;
};

struct Aggregate {
  double psnr_mean = 0.0, psnr_std = 0.0;
  double ssim_mean = 0.0, ssim_std = 0.0;
  Index count = 0;
};

/// Per-volume metric rows plus on-demand per-(method, k) aggregates.
struct MetricsReport {
  std::vector<EvalEntry> entries;

  Aggregate aggregate(const std::string& method, int ratio) const {
    Aggregate agg;
    double sp = 0, sp2 = 0, ss = 0, ss2 = 0;
    for (const auto& e : entries) {
      if (e.method != method || e.ratio != ratio) continue;
      ++agg.count;
      sp += e.psnr_db;
      sp2 += e.psnr_db * e.psnr_db;
      ss += e.ssim_value;
      ss2 += e.ssim_value * e.ssim_value;
    }
    if (agg.count == 0) return agg;
    const double n = static_cast<double>(agg.count);
    agg.psnr_mean = sp / n;
    agg.ssim_mean = ss / n;
    agg.psnr_std = std::sqrt(std::max(0.0, sp2 / n - agg.psnr_mean * agg.psnr_mean));
    agg.ssim_std = std::sqrt(std::max(0.0, ss2 / n - agg.ssim_mean * agg.ssim_mean));
    return agg;
  }

  std::vector<std::string> methods() const {
    std::vector<std::string> out;
    for (const auto& e : entries)
      if (std::find(out.begin(), out.end(), e.method) == out.end()) out.push_back(e.method);
    return out;
  }

  std::vector<int> ratios() const {
    std::vector<int> out;
    for (const auto& e : entries)
      if (std::find(out.begin(), out.end(), e.ratio) == out.end()) out.push_back(e.ratio);
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Aligned mean +/- std table, one row per method, PSNR/SSIM columns per k.
  std::string to_table() const {
    std::ostringstream os;
    const auto ks = ratios();
    os << std::left << std::setw(16) << "Method";
    for (int k : ks) {
      os << std::setw(20) << ("PSNR x" + std::to_string(k))
         << std::setw(20) << ("SSIM x" + std::to_string(k));
    }
    os << '\n';
    for (const auto& m : methods()) {
      os << std::left << std::setw(16) << m;
      for (int k : ks) {
        const Aggregate a = aggregate(m, k);
        std::ostringstream p, s;
        p << std::fixed << std::setprecision(2) << a.psnr_mean << " +- " << a.psnr_std;
        s << std::fixed << std::setprecision(4) << a.ssim_mean << " +- " << a.ssim_std;
        os << std::setw(20) << p.str() << std::setw(20) << s.str();
      }
      os << '\n';
    }
    return os.str();
  }

  /// Machine-readable line-delimited records, one JSON object per entry.
  std::string to_ldjson() const {
    std::ostringstream os;
    for (const auto& e : entries) {
      os << "{\"method\":\"" << e.method << "\",\"k\":" << e.ratio << ",\"volume\":\"" << e.volume
         << "\",\"psnr\":";
      if (std::isinf(e.psnr_db))
        os << "\"inf\"";
      else
        os << std::setprecision(17) << e.psnr_db;
      os << ",\"ssim\":" << std::setprecision(17) << e.ssim_value << "}\n";
    }
    return os.str();
  }
};

/// A named reconstruction route: LR volume + ratio -> SR volume.
template <typename Scalar>
struct MethodSpec {
  std::string name;
  std::function<Volume<Scalar>(const Volume<Scalar>&, int)> reconstruct;
};

/// Observes each scored reconstruction together with its ground-truth grid,
/// e.g. to export error maps.
template <typename Scalar>
using EvalSink =
    std::function<void(const EvalEntry&, const Volume<Scalar>&, const Volume<Scalar>&)>;

/// For every ground-truth volume and every k: normalize, drop slices,
/// reconstruct with each method, and score against the ground truth on the
/// grid the reconstruction covers.
template <typename Scalar>
MetricsReport evaluate(const std::vector<MethodSpec<Scalar>>& methods,
                       const std::vector<Volume<Scalar>>& gt_volumes,
                       const std::vector<std::string>& names, const std::vector<int>& k_list,
                       const EvalSink<Scalar>& sink = {}) {
  require(gt_volumes.size() == names.size(), "evaluate: names/volumes mismatch");
  MetricsReport report;
  for (std::size_t vi = 0; vi < gt_volumes.size(); ++vi) {
    const Volume<Scalar> gt = normalize(gt_volumes[vi]);
    for (int k : k_list) {
      const Volume<Scalar> lr = simulate_lr(gt, k);
      const Index covered = (lr.dims.depth - 1) * k + 1;
      const Volume<Scalar> gt_grid = restrict_depth(gt, covered);
      for (const auto& method : methods) {
        const Volume<Scalar> recon = method.reconstruct(lr, k);
        require(recon.dims == gt_grid.dims, "evaluate: reconstruction dims mismatch");
        report.entries.push_back(
            {method.name, k, names[vi], psnr(recon, gt_grid), ssim(recon, gt_grid)});
        if (sink) sink(report.entries.back(), recon, gt_grid);
      }
    }
  }
  return report;
}

}  // namespace ssr
