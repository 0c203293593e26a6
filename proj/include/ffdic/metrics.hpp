#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "ffdic/dic.hpp"
#include "ffdic/strain.hpp"

namespace ffdic {

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

/// Population mean and standard deviation (two-pass).
inline MeanStd population_stats(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("statistics of an empty sample");
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double x : values) sum += x;
  const double mean = sum / n;
  double ss = 0.0;
  for (double x : values) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / n)};
}

struct DisplacementStats {
  double mean_u = 0.0, mean_v = 0.0;
  double std_u = 0.0, std_v = 0.0;
  std::size_t n_points = 0, n_converged = 0;
};

struct StrainStats {
  double mean_exx = 0.0, mean_eyy = 0.0, mean_exy = 0.0;
  double std_exx = 0.0, std_eyy = 0.0, std_exy = 0.0;
  std::size_t n_points = 0;
};

struct ErrorStats {
  DisplacementStats displacement;
  StrainStats strain;
};

/// Displacement mean/std over converged points only.
inline DisplacementStats displacement_error(const DisplacementField& field) {
  std::vector<double> u, v;
  for (std::size_t k = 0; k < field.size(); ++k) {
    if (!field.converged[k]) continue;
    u.push_back(field.u[k]);
    v.push_back(field.v[k]);
  }
  if (u.size() < 2) {
    throw std::invalid_argument("displacement statistics need >= 2 converged points, got " +
                                std::to_string(u.size()));
  }
  const auto su = population_stats(u);
  const auto sv = population_stats(v);
  return {su.mean, sv.mean, su.std, sv.std, field.size(), u.size()};
}

inline StrainStats strain_error(const StrainField& field) {
  if (field.size() < 2) {
    throw std::invalid_argument("strain statistics need >= 2 points, got " + std::to_string(field.size()));
  }
  const auto xx = population_stats(field.exx);
  const auto yy = population_stats(field.eyy);
  const auto xy = population_stats(field.exy);
  return {xx.mean, yy.mean, xy.mean, xx.std, yy.std, xy.std, field.size()};
}

/// 100 * (err - baseline) / baseline.
inline double percent_increase(double err, double baseline) {
  if (!(baseline > 0.0)) throw std::invalid_argument("percent increase needs a positive baseline");
  return 100.0 * (err - baseline) / baseline;
}

}  // namespace ffdic
