#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

#include "ffdic/dic.hpp"

namespace ffdic {

struct StrainParams {
  int window_points = 7;

  void validate() const {
    if (window_points < 3 || window_points % 2 == 0) {
      throw std::invalid_argument("strain window must be odd and >= 3, got " + std::to_string(window_points));
    }
  }
};

/// Engineering strains at the grid points whose full window fits the grid.
struct StrainField {
  std::vector<GridPoint> points;
  std::vector<double> exx, eyy, exy;
  std::size_t size() const noexcept { return points.size(); }
};

/// Pointwise least-squares plane fit of u and v over a window of grid
/// points. Non-converged points are left out of each fit; windows with
/// fewer than 3 usable points or collinear support are omitted.
inline StrainField strain_field(const DisplacementField& disp, const StrainParams& params) {
  params.validate();
  const SubsetGrid& grid = disp.grid;
  const int hw = params.window_points / 2;
  if (grid.rows < params.window_points || grid.cols < params.window_points) {
    throw std::invalid_argument("displacement grid " + std::to_string(grid.cols) + "x" +
                                std::to_string(grid.rows) + " is smaller than the strain window");
  }
  if (disp.u.size() != grid.size() || disp.v.size() != grid.size() || disp.converged.size() != grid.size()) {
    throw std::invalid_argument("displacement field arrays do not match its grid");
  }

  StrainField out;
  const int max_pts = params.window_points * params.window_points;
  Eigen::MatrixXd design(max_pts, 3);
  Eigen::MatrixXd rhs(max_pts, 2);

  for (int r = hw; r < grid.rows - hw; ++r) {
    for (int c = hw; c < grid.cols - hw; ++c) {
      const std::size_t center = static_cast<std::size_t>(r) * grid.cols + c;
      const GridPoint origin = grid.points[center];
      int count = 0;
      double u_anchor = 0.0, v_anchor = 0.0;
      for (int wr = r - hw; wr <= r + hw; ++wr) {
        for (int wc = c - hw; wc <= c + hw; ++wc) {
          const std::size_t k = static_cast<std::size_t>(wr) * grid.cols + wc;
          if (!disp.converged[k]) continue;
          if (count == 0) {
            u_anchor = disp.u[k];
            v_anchor = disp.v[k];
          }
          design(count, 0) = 1.0;
          design(count, 1) = grid.points[k].x - origin.x;
          design(count, 2) = grid.points[k].y - origin.y;
          // Anchored values make a constant field an exact zero right-hand side.
          rhs(count, 0) = disp.u[k] - u_anchor;
          rhs(count, 1) = disp.v[k] - v_anchor;
          ++count;
        }
      }
      if (count < 3) continue;
      const auto qr = design.topRows(count).colPivHouseholderQr();
      if (qr.rank() < 3) continue;
      const Eigen::MatrixXd coef = qr.solve(rhs.topRows(count));
      out.points.push_back(origin);
      out.exx.push_back(coef(1, 0));
      out.eyy.push_back(coef(2, 1));
      out.exy.push_back(0.5 * (coef(2, 0) + coef(1, 1)));
    }
  }
  return out;
}

}  // namespace ffdic
