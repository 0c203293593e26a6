#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "ffdic/image.hpp"
#include "ffdic/parallel.hpp"
#include "ffdic/rng.hpp"

namespace ffdic {

/// Random dot pattern parameters, in full-resolution pixels.
struct SpeckleSpec {
  double dot_diameter = 14.0;
  double mean_spacing = 21.0;
  double foreground = 0.1;
  double background = 0.9;
  double blur_sigma = 0.0;   // 0 = in focus
  double noise_sigma = 0.0;  // intensity units
  std::uint64_t seed = 1;

  void validate() const {
    if (!(dot_diameter > 0.0)) throw std::invalid_argument("dot_diameter must be > 0");
    if (!(mean_spacing > 0.0)) throw std::invalid_argument("mean_spacing must be > 0");
    if (foreground == background) throw std::invalid_argument("foreground must differ from background");
    if (foreground < 0.0 || foreground > 1.0 || background < 0.0 || background > 1.0) {
      throw std::invalid_argument("intensities must lie in [0,1]");
    }
    if (!(blur_sigma >= 0.0)) throw std::invalid_argument("blur_sigma must be >= 0");
    if (!(noise_sigma >= 0.0)) throw std::invalid_argument("noise_sigma must be >= 0");
  }
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

/// Continuous-domain speckle: disks of one radius, rendered as a union.
struct DotSet {
  std::vector<Point2> centers;
  double radius = 0.0;
  int domain_width = 0;
  int domain_height = 0;

  friend bool operator==(const DotSet&, const DotSet&) = default;
};

/// Number of dots generate_dots places for a domain.
inline std::size_t dot_count(const SpeckleSpec& spec, int width, int height) {
  return static_cast<std::size_t>(
      std::floor(static_cast<double>(width) * static_cast<double>(height) /
                 (spec.mean_spacing * spec.mean_spacing)));
}

inline DotSet generate_dots(const SpeckleSpec& spec, int width, int height) {
  spec.validate();
  if (width < 1 || height < 1) throw DimensionError("dot domain must be at least 1x1");
  const std::size_t n = dot_count(spec, width, height);
  if (n == 0) {
    throw std::invalid_argument("mean_spacing " + std::to_string(spec.mean_spacing) +
                                " too large for a " + std::to_string(width) + "x" +
                                std::to_string(height) + " domain");
  }
  auto engine = make_engine(spec.seed, Stream::kDots);
  std::uniform_real_distribution<double> ux(0.0, static_cast<double>(width));
  std::uniform_real_distribution<double> uy(0.0, static_cast<double>(height));
  DotSet dots;
  dots.radius = spec.dot_diameter / 2.0;
  dots.domain_width = width;
  dots.domain_height = height;
  dots.centers.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    double x = ux(engine);
    double y = uy(engine);
    dots.centers.push_back({x, y});
  }
  return dots;
}

/// Subsamples per pixel axis used for area coverage.
inline constexpr int kCoverageSubsamples = 10;

namespace detail {

/// Uniform bucket grid over dot centers for conservative neighbor queries.
class DotBuckets {
 public:
  explicit DotBuckets(const DotSet& dots) : radius_(dots.radius) {
    if (dots.centers.empty()) return;
    double minx = dots.centers[0].x, maxx = minx, miny = dots.centers[0].y, maxy = miny;
    for (const auto& c : dots.centers) {
      minx = std::min(minx, c.x);
      maxx = std::max(maxx, c.x);
      miny = std::min(miny, c.y);
      maxy = std::max(maxy, c.y);
    }
    cell_ = std::max(4.0, 2.0 * radius_ + 2.0);
    x0_ = std::floor(minx);
    y0_ = std::floor(miny);
    nx_ = static_cast<int>((maxx - x0_) / cell_) + 1;
    ny_ = static_cast<int>((maxy - y0_) / cell_) + 1;
    offsets_.assign(static_cast<std::size_t>(nx_) * ny_ + 1, 0);
    std::vector<int> key(dots.centers.size());
    for (std::size_t i = 0; i < dots.centers.size(); ++i) {
      key[i] = bucket_of(dots.centers[i]);
      ++offsets_[key[i] + 1];
    }
    for (std::size_t b = 1; b < offsets_.size(); ++b) offsets_[b] += offsets_[b - 1];
    std::vector<int> fill(offsets_.begin(), offsets_.end() - 1);
    ids_.resize(dots.centers.size());
    for (std::size_t i = 0; i < dots.centers.size(); ++i) {
      ids_[fill[key[i]]++] = static_cast<int>(i);
    }
  }

  /// Appends indices of dots whose center lies within the box expanded by
  /// the radius (plus slack). Superset of all dots touching the box.
  void query(double bx0, double by0, double bx1, double by1, std::vector<int>& out) const {
    if (ids_.empty()) return;
    const double pad = radius_ + 1e-6;
    int cx0 = std::max(0, static_cast<int>(std::floor((bx0 - pad - x0_) / cell_)));
    int cy0 = std::max(0, static_cast<int>(std::floor((by0 - pad - y0_) / cell_)));
    int cx1 = std::min(nx_ - 1, static_cast<int>(std::floor((bx1 + pad - x0_) / cell_)));
    int cy1 = std::min(ny_ - 1, static_cast<int>(std::floor((by1 + pad - y0_) / cell_)));
    for (int cy = cy0; cy <= cy1; ++cy) {
      for (int cx = cx0; cx <= cx1; ++cx) {
        int b = cy * nx_ + cx;
        for (int k = offsets_[b]; k < offsets_[b + 1]; ++k) out.push_back(ids_[k]);
      }
    }
  }

 private:
  int bucket_of(const Point2& c) const {
    int bx = std::clamp(static_cast<int>((c.x - x0_) / cell_), 0, nx_ - 1);
    int by = std::clamp(static_cast<int>((c.y - y0_) / cell_), 0, ny_ - 1);
    return by * nx_ + bx;
  }

  double radius_ = 0.0;
  double cell_ = 1.0;
  double x0_ = 0.0, y0_ = 0.0;
  int nx_ = 0, ny_ = 0;
  std::vector<int> offsets_;
  std::vector<int> ids_;
};

}  // namespace detail

/// Renders the dot union translated by (dx, dy) with area sampling.
///
/// All geometry is evaluated in the dot frame: the pixel cell is moved by
/// (-dx, -dy) rather than the disks by (+dx, +dy). For integer shifts the
/// moved cell coordinates are exact integers, so integer translation is
/// bit-exactly equivariant.
inline Image rasterize(const DotSet& dots, double dx, double dy, int width, int height,
                       double foreground = 0.0, double background = 1.0) {
  if (width < 1 || height < 1) throw DimensionError("raster size must be at least 1x1");
  if (!std::isfinite(dx) || !std::isfinite(dy)) throw std::invalid_argument("shift must be finite");
  if (!dots.centers.empty() && !(dots.radius > 0.0)) throw std::invalid_argument("dot radius must be > 0");

  Image out(width, height, background);
  if (dots.centers.empty()) return out;

  constexpr int K = kCoverageSubsamples;
  const double r2 = dots.radius * dots.radius;
  const double lo = std::min(foreground, background);
  const double hi = std::max(foreground, background);
  const detail::DotBuckets buckets(dots);

  parallel_for(static_cast<std::size_t>(height), [&](std::size_t row) {
    const int i = static_cast<int>(row);
    const double y0 = static_cast<double>(i) - dy;
    std::vector<int> candidates;
    std::vector<int> touching;
    auto out_row = out.row(i);
    for (int j = 0; j < width; ++j) {
      const double x0 = static_cast<double>(j) - dx;
      candidates.clear();
      buckets.query(x0, y0, x0 + 1.0, y0 + 1.0, candidates);
      touching.clear();
      bool full = false;
      for (int id : candidates) {
        const Point2& c = dots.centers[id];
        double nx = std::clamp(c.x, x0, x0 + 1.0) - c.x;
        double ny = std::clamp(c.y, y0, y0 + 1.0) - c.y;
        if (nx * nx + ny * ny >= r2) continue;
        double fx = std::max(std::abs(x0 - c.x), std::abs(x0 + 1.0 - c.x));
        double fy = std::max(std::abs(y0 - c.y), std::abs(y0 + 1.0 - c.y));
        if (fx * fx + fy * fy < r2) {
          full = true;
          break;
        }
        touching.push_back(id);
      }
      double coverage = 0.0;
      if (full) {
        coverage = 1.0;
      } else if (!touching.empty()) {
        int hits = 0;
        for (int a = 0; a < K; ++a) {
          const double sy = y0 + (a + 0.5) / K;
          for (int b = 0; b < K; ++b) {
            const double sx = x0 + (b + 0.5) / K;
            for (int id : touching) {
              const Point2& c = dots.centers[id];
              double ex = sx - c.x;
              double ey = sy - c.y;
              if (ex * ex + ey * ey < r2) {
                ++hits;
                break;
              }
            }
          }
        }
        coverage = static_cast<double>(hits) / (K * K);
      }
      out_row[j] = std::clamp(background + (foreground - background) * coverage, lo, hi);
    }
  });
  return out;
}

/// Convenience overload taking intensities from the speckle spec.
inline Image rasterize(const DotSet& dots, const SpeckleSpec& spec, double dx, double dy,
                       int width, int height) {
  return rasterize(dots, dx, dy, width, height, spec.foreground, spec.background);
}

/// Mirror index (reflect without repeating the edge sample).
inline int reflect_index(int i, int n) noexcept {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

inline std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(4.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int t = -radius; t <= radius; ++t) {
    double w = std::exp(-0.5 * t * t / (sigma * sigma));
    k[t + radius] = w;
    sum += w;
  }
  for (double& w : k) w /= sum;
  return k;
}

/// Separable Gaussian blur, kernel truncated at ceil(4 sigma), mirrored edges.
inline Image gaussian_blur(const Image& img, double sigma) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("blur sigma must be >= 0");
  if (sigma == 0.0) return img;
  const auto kernel = gaussian_kernel(sigma);
  const int radius = static_cast<int>(kernel.size() / 2);
  const int w = img.width();
  const int h = img.height();

  Image horiz(w, h);
  parallel_for(static_cast<std::size_t>(h), [&](std::size_t row) {
    const int i = static_cast<int>(row);
    auto src = img.row(i);
    auto dst = horiz.row(i);
    for (int j = 0; j < w; ++j) {
      double acc = 0.0;
      for (int t = -radius; t <= radius; ++t) acc += kernel[t + radius] * src[reflect_index(j + t, w)];
      dst[j] = acc;
    }
  });

  Image out(w, h);
  parallel_for(static_cast<std::size_t>(h), [&](std::size_t row) {
    const int i = static_cast<int>(row);
    auto dst = out.row(i);
    for (int t = -radius; t <= radius; ++t) {
      const double wt = kernel[t + radius];
      auto src = horiz.row(reflect_index(i + t, h));
      for (int j = 0; j < w; ++j) dst[j] += wt * src[j];
    }
  });
  return out;
}

/// Adds i.i.d. Gaussian noise and clamps to [0,1].
inline Image add_noise(const Image& img, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("noise sigma must be >= 0");
  if (sigma == 0.0) return img;
  auto engine = make_engine(seed, Stream::kNoise);
  std::normal_distribution<double> noise(0.0, sigma);
  Image out = img;
  for (double& v : out.pixels()) v = std::clamp(v + noise(engine), 0.0, 1.0);
  return out;
}

/// Union render followed by the spec's defocus blur (noise is applied separately).
inline Image render(const DotSet& dots, const SpeckleSpec& spec, double dx, double dy,
                    int width, int height) {
  Image img = rasterize(dots, spec, dx, dy, width, height);
  if (spec.blur_sigma > 0.0) img = gaussian_blur(img, spec.blur_sigma);
  return img;
}

}  // namespace ffdic
