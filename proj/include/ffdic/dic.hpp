#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ffdic/image.hpp"
#include "ffdic/parallel.hpp"

namespace ffdic {

/// Axis-aligned region of interest in analysis-image pixels.
struct Roi {
  int x0 = 0;
  int y0 = 0;
  int width = 0;
  int height = 0;
  friend bool operator==(const Roi&, const Roi&) = default;
};

inline constexpr int kDefaultRoiSide = 400;
/// Extra pixels a bicubic sample needs beyond the point it is evaluated at.
inline constexpr int kInterpolationMargin = 2;

struct DicParams {
  int subset_size = 41;
  int step = 20;
  std::optional<Roi> roi;  // unset = centered kDefaultRoiSide square
  double initial_u = 0.0;
  double initial_v = 0.0;
  int search_radius = 10;
  int max_iterations = 50;
  double convergence_tol = 1e-4;

  int half_subset() const noexcept { return (subset_size - 1) / 2; }

  void validate() const {
    if (subset_size < 11 || subset_size % 2 == 0) {
      throw std::invalid_argument("subset_size must be odd and >= 11, got " + std::to_string(subset_size));
    }
    if (step < 1) throw std::invalid_argument("step must be >= 1");
    if (search_radius < 1) throw std::invalid_argument("search_radius must be >= 1");
    if (max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");
    if (!(convergence_tol > 0.0)) throw std::invalid_argument("convergence_tol must be > 0");
    if (!std::isfinite(initial_u) || !std::isfinite(initial_v)) {
      throw std::invalid_argument("initial guess must be finite");
    }
    if (roi && (roi->width < 1 || roi->height < 1)) throw std::invalid_argument("roi must be non-empty");
  }
};

/// ROI actually used for an image of the given size.
inline Roi resolve_roi(const DicParams& params, int width, int height) {
  if (params.roi) return *params.roi;
  const int side = std::min({kDefaultRoiSide, width, height});
  return {(width - side) / 2, (height - side) / 2, side, side};
}

struct GridPoint {
  int x = 0;
  int y = 0;
  friend bool operator==(const GridPoint&, const GridPoint&) = default;
};

/// Subset centers, row-major, forming a rows x cols lattice.
struct SubsetGrid {
  std::vector<GridPoint> points;
  int rows = 0;
  int cols = 0;
  int step = 1;
  std::size_t size() const noexcept { return points.size(); }
};

namespace detail {

inline int round_to_int(double v) { return static_cast<int>(std::lround(v)); }

/// Lattice coordinates along one axis: anchored at roi origin + half subset,
/// subsets contained in [origin, origin + extent], and the subset plus search
/// and interpolation margins inside the image for both the reference position
/// and the guess-displaced deformed position.
inline std::vector<int> lattice_axis(int origin, int extent, int image_extent, int half, int step,
                                     int margin, int guess) {
  std::vector<int> coords;
  for (int c = origin + half; c + half <= origin + extent; c += step) {
    const bool ref_ok = c - half - margin >= 0 && c + half + margin <= image_extent - 1;
    const bool def_ok = c + guess - half - margin >= 0 && c + guess + half + margin <= image_extent - 1;
    if (ref_ok && def_ok) coords.push_back(c);
  }
  return coords;
}

}  // namespace detail

inline SubsetGrid build_grid(const DicParams& params, int width, int height) {
  params.validate();
  const Roi roi = resolve_roi(params, width, height);
  if (roi.x0 < 0 || roi.y0 < 0 || roi.x0 + roi.width > width || roi.y0 + roi.height > height) {
    throw std::invalid_argument("roi lies outside the image");
  }
  const int half = params.half_subset();
  const int margin = params.search_radius + kInterpolationMargin;
  auto xs = detail::lattice_axis(roi.x0, roi.width, width, half, params.step, margin,
                                 detail::round_to_int(params.initial_u));
  auto ys = detail::lattice_axis(roi.y0, roi.height, height, half, params.step, margin,
                                 detail::round_to_int(params.initial_v));
  if (xs.empty() || ys.empty()) {
    throw std::invalid_argument("empty subset grid: roi too small for subset size and margins");
  }
  SubsetGrid grid;
  grid.rows = static_cast<int>(ys.size());
  grid.cols = static_cast<int>(xs.size());
  grid.step = params.step;
  grid.points.reserve(xs.size() * ys.size());
  for (int y : ys) {
    for (int x : xs) grid.points.push_back({x, y});
  }
  return grid;
}

/// Zero-mean normalized cross-correlation; nullopt when either input has
/// zero variance.
inline std::optional<double> zncc(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw std::invalid_argument("zncc needs two equal-length inputs of size >= 2");
  }
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) return std::nullopt;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

/// Keys cubic convolution kernel with a = -0.5.
constexpr double keys_kernel(double s) noexcept {
  constexpr double a = -0.5;
  const double t = s < 0 ? -s : s;
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

namespace detail {

inline bool bicubic_in_bounds(const Image& img, double x, double y) noexcept {
  if (!std::isfinite(x) || !std::isfinite(y)) return false;
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  return fx - 1 >= 0 && fx + 2 <= img.width() - 1 && fy - 1 >= 0 && fy + 2 <= img.height() - 1;
}

/// Unchecked bicubic sample; caller guarantees bicubic_in_bounds.
inline double bicubic(const Image& img, double x, double y) noexcept {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const double tx = x - fx;
  const double ty = y - fy;
  const int cx = static_cast<int>(fx);
  const int cy = static_cast<int>(fy);
  const std::array<double, 4> wx = {keys_kernel(1.0 + tx), keys_kernel(tx), keys_kernel(1.0 - tx),
                                    keys_kernel(2.0 - tx)};
  const std::array<double, 4> wy = {keys_kernel(1.0 + ty), keys_kernel(ty), keys_kernel(1.0 - ty),
                                    keys_kernel(2.0 - ty)};
  double acc = 0.0;
  for (int m = 0; m < 4; ++m) {
    const double* row = img.row(cy - 1 + m).data() + (cx - 1);
    acc += wy[m] * (wx[0] * row[0] + wx[1] * row[1] + wx[2] * row[2] + wx[3] * row[3]);
  }
  return acc;
}

}  // namespace detail

/// Bicubic (Keys, a = -0.5) sample at column x, row y.
inline double interpolate(const Image& img, double x, double y) {
  if (!detail::bicubic_in_bounds(img, x, y)) {
    throw std::out_of_range("bicubic sample at (" + std::to_string(x) + ", " + std::to_string(y) +
                            ") needs a 2 pixel margin inside the image");
  }
  return detail::bicubic(img, x, y);
}

/// Why a grid point did or did not produce a converged displacement.
enum class PointStatus : std::uint8_t {
  kConverged,
  kMaxIterations,
  kDegenerateSubset,  // zero intensity variance
  kSingularHessian,
  kOutOfBounds,  // warped subset left the interpolable area
  kDiverged,     // refinement moved more than 1 px from the integer estimate
};

constexpr std::string_view to_string(PointStatus s) noexcept {
  switch (s) {
    case PointStatus::kConverged: return "converged";
    case PointStatus::kMaxIterations: return "max_iterations";
    case PointStatus::kDegenerateSubset: return "degenerate_subset";
    case PointStatus::kSingularHessian: return "singular_hessian";
    case PointStatus::kOutOfBounds: return "out_of_bounds";
    case PointStatus::kDiverged: return "diverged";
  }
  return "?";
}

struct IntegerShift {
  int du = 0;
  int dv = 0;
  double zncc = 0.0;
};

namespace detail {

inline void extract_subset(const Image& img, int cx, int cy, int half, std::vector<double>& out) {
  const int size = 2 * half + 1;
  out.resize(static_cast<std::size_t>(size) * size);
  for (int r = 0; r < size; ++r) {
    auto src = img.row(cy - half + r);
    std::copy_n(src.data() + (cx - half), size, out.data() + static_cast<std::size_t>(r) * size);
  }
}

inline void require_subset_inside(const Image& img, int cx, int cy, int half, std::string_view what) {
  if (cx - half < 0 || cy - half < 0 || cx + half >= img.width() || cy + half >= img.height()) {
    throw std::out_of_range(std::string(what) + " subset leaves the image");
  }
}

}  // namespace detail

/// Best integer translation by ZNCC over the square window centered on the
/// rounded initial guess. Ties resolve to the smallest (dv, du). Returns
/// nullopt when the reference subset or every candidate is degenerate.
inline std::optional<IntegerShift> integer_search(const Image& ref, const Image& def, GridPoint point,
                                                  const DicParams& params) {
  const int half = params.half_subset();
  const int size = params.subset_size;
  const int gu = detail::round_to_int(params.initial_u);
  const int gv = detail::round_to_int(params.initial_v);
  const int rad = params.search_radius;
  detail::require_subset_inside(ref, point.x, point.y, half, "reference");
  detail::require_subset_inside(def, point.x + gu - rad, point.y + gv - rad, half, "search window");
  detail::require_subset_inside(def, point.x + gu + rad, point.y + gv + rad, half, "search window");

  std::vector<double> f;
  detail::extract_subset(ref, point.x, point.y, half, f);
  const double n = static_cast<double>(f.size());
  double mean = 0.0;
  for (double v : f) mean += v;
  mean /= n;
  double norm = 0.0;
  for (double& v : f) {
    v -= mean;
    norm += v * v;
  }
  if (norm <= 0.0) return std::nullopt;
  norm = std::sqrt(norm);

  std::optional<IntegerShift> best;
  for (int dv = gv - rad; dv <= gv + rad; ++dv) {
    for (int du = gu - rad; du <= gu + rad; ++du) {
      double cross = 0.0, sum = 0.0, sumsq = 0.0;
      for (int r = 0; r < size; ++r) {
        const double* g = def.row(point.y + dv - half + r).data() + (point.x + du - half);
        const double* a = f.data() + static_cast<std::size_t>(r) * size;
        for (int c = 0; c < size; ++c) {
          cross += a[c] * g[c];
          sum += g[c];
          sumsq += g[c] * g[c];
        }
      }
      const double var = sumsq - sum * sum / n;
      if (!(var > 1e-14 * std::max(1.0, sumsq))) continue;
      const double score = cross / (norm * std::sqrt(var));
      if (!best || score > best->zncc) best = IntegerShift{du, dv, score};
    }
  }
  return best;
}

/// First-order (affine) subset warp: u, du/dx, du/dy, v, dv/dx, dv/dy.
struct WarpParams {
  double u = 0.0, ux = 0.0, uy = 0.0;
  double v = 0.0, vx = 0.0, vy = 0.0;
};

namespace detail {

inline Eigen::Matrix3d warp_matrix(const WarpParams& p) {
  Eigen::Matrix3d m;
  m << 1.0 + p.ux, p.uy, p.u, p.vx, 1.0 + p.vy, p.v, 0.0, 0.0, 1.0;
  return m;
}

inline WarpParams warp_from_matrix(const Eigen::Matrix3d& m) {
  return {m(0, 2), m(0, 0) - 1.0, m(0, 1), m(1, 2), m(1, 0), m(1, 1) - 1.0};
}

/// Closed-form inverse of an affine 3x3 warp matrix.
inline Eigen::Matrix3d invert_affine(const Eigen::Matrix3d& m) {
  const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  Eigen::Matrix3d inv = Eigen::Matrix3d::Identity();
  inv(0, 0) = m(1, 1) / det;
  inv(0, 1) = -m(0, 1) / det;
  inv(1, 0) = -m(1, 0) / det;
  inv(1, 1) = m(0, 0) / det;
  inv(0, 2) = -(inv(0, 0) * m(0, 2) + inv(0, 1) * m(1, 2));
  inv(1, 2) = -(inv(1, 0) * m(0, 2) + inv(1, 1) * m(1, 2));
  return inv;
}

}  // namespace detail

struct IcgnResult {
  WarpParams p;
  double zncc = 0.0;
  int iterations = 0;
  bool converged = false;
  PointStatus status = PointStatus::kMaxIterations;
  double last_update_norm = std::numeric_limits<double>::infinity();
};

/// Inverse-compositional Gauss-Newton refinement of one subset under the
/// ZNSSD criterion. The Hessian comes from the reference subset once; each
/// iteration samples the deformed image at the current warp, solves for the
/// incremental warp and composes its inverse into the estimate. Converged
/// when the (u, v) part of the increment has norm <= convergence_tol.
inline IcgnResult icgn_refine(const Image& ref, const Image& def, GridPoint point, const WarpParams& p0,
                              const DicParams& params) {
  using Vec6 = Eigen::Matrix<double, 6, 1>;
  using Mat6 = Eigen::Matrix<double, 6, 6>;

  const int half = params.half_subset();
  const int size = params.subset_size;
  const std::size_t n = static_cast<std::size_t>(size) * size;
  if (point.x - half - 1 < 0 || point.y - half - 1 < 0 || point.x + half + 1 >= ref.width() ||
      point.y + half + 1 >= ref.height()) {
    throw std::out_of_range("reference subset plus gradient stencil leaves the image");
  }

  IcgnResult result;
  result.p = p0;

  std::vector<double> f(n);
  std::vector<std::array<double, 6>> sd(n);
  double fmean = 0.0;
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      fmean += ref(point.y - half + r, point.x - half + c);
    }
  }
  fmean /= static_cast<double>(n);

  Mat6 hessian = Mat6::Zero();
  double fnorm = 0.0;
  for (int r = 0; r < size; ++r) {
    const int y = point.y - half + r;
    const double eta = r - half;
    for (int c = 0; c < size; ++c) {
      const int x = point.x - half + c;
      const double xi = c - half;
      const std::size_t k = static_cast<std::size_t>(r) * size + c;
      f[k] = ref(y, x) - fmean;
      fnorm += f[k] * f[k];
      const double gx = 0.5 * (ref(y, x + 1) - ref(y, x - 1));
      const double gy = 0.5 * (ref(y + 1, x) - ref(y - 1, x));
      sd[k] = {gx, gx * xi, gx * eta, gy, gy * xi, gy * eta};
      Eigen::Map<const Vec6> s(sd[k].data());
      hessian.noalias() += s * s.transpose();
    }
  }
  if (fnorm <= 0.0) {
    result.status = PointStatus::kDegenerateSubset;
    return result;
  }
  fnorm = std::sqrt(fnorm);

  const Eigen::LDLT<Mat6> solver(hessian);
  // LDLT zeroes singular pivots instead of failing, so inspect D directly.
  const auto pivots = solver.vectorD().cwiseAbs();
  if (solver.info() != Eigen::Success || !solver.isPositive() || !(pivots.minCoeff() > 1e-12 * pivots.maxCoeff())) {
    result.status = PointStatus::kSingularHessian;
    return result;
  }

  std::vector<double> g(n);
  // Samples the deformed subset under warp p; returns its zero-mean norm or
  // nullopt when out of bounds / degenerate.
  auto sample = [&](const WarpParams& p) -> std::optional<double> {
    double gmean = 0.0;
    for (int r = 0; r < size; ++r) {
      const double eta = r - half;
      for (int c = 0; c < size; ++c) {
        const double xi = c - half;
        const double xw = point.x + xi + p.u + p.ux * xi + p.uy * eta;
        const double yw = point.y + eta + p.v + p.vx * xi + p.vy * eta;
        if (!detail::bicubic_in_bounds(def, xw, yw)) {
          result.status = PointStatus::kOutOfBounds;
          return std::nullopt;
        }
        const double val = detail::bicubic(def, xw, yw);
        g[static_cast<std::size_t>(r) * size + c] = val;
        gmean += val;
      }
    }
    gmean /= static_cast<double>(n);
    double gnorm = 0.0;
    for (double& val : g) {
      val -= gmean;
      gnorm += val * val;
    }
    if (gnorm <= 0.0) {
      result.status = PointStatus::kDegenerateSubset;
      return std::nullopt;
    }
    return std::sqrt(gnorm);
  };

  for (int iter = 1; iter <= params.max_iterations; ++iter) {
    const auto gnorm = sample(result.p);
    if (!gnorm) return result;
    const double scale = fnorm / *gnorm;
    Vec6 rhs = Vec6::Zero();
    for (std::size_t k = 0; k < n; ++k) {
      const double e = f[k] - scale * g[k];
      Eigen::Map<const Vec6> s(sd[k].data());
      rhs.noalias() += s * e;
    }
    const Vec6 dp = -solver.solve(rhs);
    const WarpParams inc{dp(0), dp(1), dp(2), dp(3), dp(4), dp(5)};
    const Eigen::Matrix3d composed =
        detail::warp_matrix(result.p) * detail::invert_affine(detail::warp_matrix(inc));
    result.p = detail::warp_from_matrix(composed);
    result.iterations = iter;
    result.last_update_norm = std::hypot(inc.u, inc.v);
    if (!std::isfinite(result.p.u) || !std::isfinite(result.p.v)) {
      result.status = PointStatus::kDiverged;
      return result;
    }
    if (result.last_update_norm <= params.convergence_tol) {
      result.converged = true;
      result.status = PointStatus::kConverged;
      break;
    }
  }

  const auto gnorm = sample(result.p);
  if (!gnorm) {
    result.converged = false;
    return result;
  }
  double cross = 0.0;
  for (std::size_t k = 0; k < n; ++k) cross += f[k] * g[k];
  result.zncc = std::clamp(cross / (fnorm * *gnorm), -1.0, 1.0);
  return result;
}

/// Per-point correlation output in grid order.
struct DisplacementField {
  SubsetGrid grid;
  std::vector<double> u, v, zncc;
  std::vector<std::uint8_t> converged;
  std::vector<int> iterations;
  std::vector<PointStatus> status;

  std::size_t size() const noexcept { return grid.size(); }
  std::size_t converged_count() const noexcept {
    return static_cast<std::size_t>(std::count(converged.begin(), converged.end(), std::uint8_t{1}));
  }

  void resize(std::size_t n) {
    u.assign(n, 0.0);
    v.assign(n, 0.0);
    zncc.assign(n, 0.0);
    converged.assign(n, 0);
    iterations.assign(n, 0);
    status.assign(n, PointStatus::kMaxIterations);
  }
};

/// Integer search followed by IC-GN refinement at every grid point.
/// Per-point failures are recorded in the field, never thrown.
inline DisplacementField correlate(const Image& ref, const Image& def, const DicParams& params) {
  if (ref.width() != def.width() || ref.height() != def.height()) {
    throw DimensionError("reference and deformed images differ in size");
  }
  DisplacementField field;
  field.grid = build_grid(params, ref.width(), ref.height());
  field.resize(field.grid.size());

  parallel_for(field.grid.size(), [&](std::size_t k) {
    const GridPoint pt = field.grid.points[k];
    field.u[k] = params.initial_u;
    field.v[k] = params.initial_v;
    const auto coarse = integer_search(ref, def, pt, params);
    if (!coarse) {
      field.status[k] = PointStatus::kDegenerateSubset;
      return;
    }
    field.u[k] = coarse->du;
    field.v[k] = coarse->dv;
    field.zncc[k] = coarse->zncc;
    WarpParams p0;
    p0.u = coarse->du;
    p0.v = coarse->dv;
    const IcgnResult fine = icgn_refine(ref, def, pt, p0, params);
    field.iterations[k] = fine.iterations;
    field.status[k] = fine.status;
    if (fine.status == PointStatus::kDegenerateSubset || fine.status == PointStatus::kSingularHessian ||
        fine.status == PointStatus::kOutOfBounds) {
      return;
    }
    if (std::abs(fine.p.u - coarse->du) > 1.0 || std::abs(fine.p.v - coarse->dv) > 1.0) {
      field.status[k] = PointStatus::kDiverged;
      return;
    }
    field.u[k] = fine.p.u;
    field.v[k] = fine.p.v;
    field.zncc[k] = fine.zncc;
    field.converged[k] = fine.converged ? 1 : 0;
  });
  return field;
}

}  // namespace ffdic
