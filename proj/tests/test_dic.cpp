#include "ffdic/dic.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>

#include "ffdic/metrics.hpp"
#include "test_support.hpp"

namespace ffdic {
namespace {

using testing::random_image;
using testing::shift_integer;
using testing::speckle_pair;

// --- build_grid -------------------------------------------------------------

DicParams grid_params(Roi roi, int subset = 41, int step = 20, int search = 10) {
  DicParams p;
  p.roi = roi;
  p.subset_size = subset;
  p.step = step;
  p.search_radius = search;
  return p;
}

TEST(BuildGrid, DefaultRoiExampleHas361Points) {
  const auto grid = build_grid(grid_params({56, 56, 400, 400}), 512, 512);
  // Subset centers run from x0 + h to x0 + w - h in steps: (400 - 40) / 20 + 1 = 19 per axis.
  EXPECT_EQ(grid.cols, 19);
  EXPECT_EQ(grid.rows, 19);
  EXPECT_EQ(grid.size(), 361u);
  EXPECT_EQ(grid.points.front(), (GridPoint{76, 76}));
  EXPECT_EQ(grid.points.back(), (GridPoint{436, 436}));
  // Row-major.
  EXPECT_EQ(grid.points[1], (GridPoint{96, 76}));
  EXPECT_EQ(grid.points[19], (GridPoint{76, 96}));
  EXPECT_EQ(build_grid(DicParams{}, 512, 512).size(), 361u);
}

TEST(BuildGrid, EveryPointSatisfiesMarginInvariant) {
  for (auto [u0, v0] : {std::pair{0.0, 0.0}, std::pair{64.0, 0.0}, std::pair{-7.4, 12.6}}) {
    DicParams p = grid_params({10, 10, 480, 480});
    p.initial_u = u0;
    p.initial_v = v0;
    const auto grid = build_grid(p, 512, 512);
    const int m = 20 + 10 + kInterpolationMargin;
    const int gu = static_cast<int>(std::lround(u0));
    const int gv = static_cast<int>(std::lround(v0));
    ASSERT_FALSE(grid.points.empty());
    for (const auto& pt : grid.points) {
      EXPECT_GE(pt.x - m, 0);
      EXPECT_LE(pt.x + m, 511);
      EXPECT_GE(pt.x + gu - m, 0);
      EXPECT_LE(pt.x + gu + m, 511);
      EXPECT_GE(pt.y + gv - m, 0);
      EXPECT_LE(pt.y + gv + m, 511);
    }
  }
}

TEST(BuildGrid, OneSubsetPlusMarginsGivesOnePoint) {
  // 65 = 41 + 2 * (10 + 2): the single subset fills the image exactly.
  const auto grid = build_grid(grid_params({12, 12, 41, 41}), 65, 65);
  ASSERT_EQ(grid.size(), 1u);
  EXPECT_EQ(grid.points[0], (GridPoint{32, 32}));
}

TEST(BuildGrid, StepLargerThanRoiGivesOnePointPerAxis) {
  const auto grid = build_grid(grid_params({100, 100, 120, 90}, 41, 500), 512, 512);
  EXPECT_EQ(grid.rows, 1);
  EXPECT_EQ(grid.cols, 1);
}

TEST(BuildGrid, Errors) {
  EXPECT_THROW(build_grid(grid_params({0, 0, 30, 30}), 512, 512), std::invalid_argument);     // too small
  EXPECT_THROW(build_grid(grid_params({500, 0, 100, 100}), 512, 512), std::invalid_argument);  // outside
  EXPECT_THROW(build_grid(grid_params({0, 0, 64, 64}), 64, 64), std::invalid_argument);      // no margin
  DicParams even = grid_params({56, 56, 400, 400}, 40);
  EXPECT_THROW(build_grid(even, 512, 512), std::invalid_argument);
}

// --- zncc ---------------------------------------------------------------------

TEST(Zncc, SelfCorrelationIsOne) {
  std::vector<double> a{0.1, 0.7, 0.3, 0.9, 0.2};
  EXPECT_NEAR(*zncc(a, a), 1.0, 1e-15);
}

TEST(Zncc, AffineInvariance) {
  std::vector<double> a{0.1, 0.7, 0.3, 0.9, 0.2};
  std::vector<double> pos, neg;
  for (double v : a) {
    pos.push_back(2.5 * v + 0.3);
    neg.push_back(-0.5 * v + 4.0);
  }
  EXPECT_NEAR(*zncc(a, pos), 1.0, 1e-14);
  EXPECT_NEAR(*zncc(a, neg), -1.0, 1e-14);
}

TEST(Zncc, ExactReversal) {
  std::vector<double> a{1, 2, 3, 4}, b{4, 3, 2, 1};
  EXPECT_DOUBLE_EQ(*zncc(a, b), -1.0);
}

TEST(Zncc, DegenerateInputsFlagged) {
  std::vector<double> a{1, 2, 3}, flat{5, 5, 5};
  EXPECT_FALSE(zncc(a, flat));
  EXPECT_FALSE(zncc(flat, a));
  std::vector<double> shorter{1, 2};
  EXPECT_THROW(zncc(a, shorter), std::invalid_argument);
}

// --- interpolate ---------------------------------------------------------------

TEST(Interpolate, IntegerPositionsReturnSamples) {
  const Image img = random_image(12, 10, 5);
  for (int r = 1; r <= 7; ++r) {
    for (int c = 1; c <= 9; ++c) EXPECT_EQ(interpolate(img, c, r), img(r, c));
  }
}

TEST(Interpolate, ReproducesLinearRamp) {
  Image img(20, 20);
  for (int r = 0; r < 20; ++r) {
    for (int c = 0; c < 20; ++c) img(r, c) = r + 2.0 * c;
  }
  for (double y : {2.0, 3.3, 7.77, 16.99}) {
    for (double x : {1.5, 4.25, 9.01, 16.5}) EXPECT_NEAR(interpolate(img, x, y), y + 2.0 * x, 1e-9);
  }
}

TEST(Interpolate, QuadraticMatchesDenseKernelSum) {
  Image img(16, 16);
  for (int r = 0; r < 16; ++r) {
    for (int c = 0; c < 16; ++c) img(r, c) = static_cast<double>(c * c);
  }
  for (double y : {3.5, 8.5}) {
    for (double x : {2.5, 5.5, 12.5}) {
      double oracle = 0.0;
      for (int r = 0; r < 16; ++r) {
        for (int c = 0; c < 16; ++c) oracle += img(r, c) * keys_kernel(x - c) * keys_kernel(y - r);
      }
      EXPECT_NEAR(interpolate(img, x, y), oracle, 1e-12);
    }
  }
  // a = -0.5 reproduces quadratics: weights (-1/16, 9/16, 9/16, -1/16)
  // on 4, 9, 16, 25 give 12.25 = 3.5^2.
  EXPECT_NEAR(interpolate(img, 3.5, 5.0), 12.25, 1e-12);
}

TEST(Interpolate, OutOfMarginThrows) {
  const Image img(10, 10, 0.5);
  EXPECT_THROW(interpolate(img, 0.5, 5.0), std::out_of_range);
  EXPECT_THROW(interpolate(img, 5.0, 7.2 + 1.0), std::out_of_range);
  EXPECT_NO_THROW(interpolate(img, 5.0, 7.2));
  EXPECT_NO_THROW(interpolate(img, 1.0, 7.0));
  EXPECT_THROW(interpolate(img, std::nan(""), 5.0), std::out_of_range);
}

TEST(Interpolate, KernelInterpolatesSamples) {
  EXPECT_EQ(keys_kernel(0.0), 1.0);
  EXPECT_EQ(keys_kernel(1.0), 0.0);
  EXPECT_EQ(keys_kernel(-1.0), 0.0);
  EXPECT_EQ(keys_kernel(2.0), 0.0);
  EXPECT_EQ(keys_kernel(2.5), 0.0);
  // Partition of unity at an arbitrary phase.
  const double t = 0.37;
  EXPECT_NEAR(keys_kernel(1 + t) + keys_kernel(t) + keys_kernel(1 - t) + keys_kernel(2 - t), 1.0, 1e-15);
}

// --- integer_search ----------------------------------------------------------

class SpeckleFixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { pair_ = new testing::SyntheticPair(speckle_pair(0.4, 0.0, 256)); }
  static void TearDownTestSuite() {
    delete pair_;
    pair_ = nullptr;
  }
  static const Image& ref() { return pair_->reference; }
  static const Image& def04() { return pair_->deformed; }
  static inline testing::SyntheticPair* pair_ = nullptr;
};

TEST_F(SpeckleFixture, IntegerSearchIdentity) {
  DicParams p;
  const auto s = integer_search(ref(), ref(), {128, 128}, p);
  ASSERT_TRUE(s);
  EXPECT_EQ(s->du, 0);
  EXPECT_EQ(s->dv, 0);
  EXPECT_NEAR(s->zncc, 1.0, 1e-12);
}

TEST_F(SpeckleFixture, IntegerSearchFindsCopyShift) {
  const Image def = shift_integer(ref(), 5, 0);
  DicParams p;
  const auto s = integer_search(ref(), def, {128, 128}, p);
  ASSERT_TRUE(s);
  EXPECT_EQ(s->du, 5);
  EXPECT_EQ(s->dv, 0);
}

TEST_F(SpeckleFixture, IntegerSearchCentersWindowOnGuess) {
  const Image def = shift_integer(ref(), 64, 0);
  DicParams p;
  p.initial_u = 64.0;
  const auto s = integer_search(ref(), def, {100, 128}, p);
  ASSERT_TRUE(s);
  EXPECT_EQ(s->du, 64);
  EXPECT_EQ(s->dv, 0);
}

TEST(IntegerSearch, TiesResolveToSmallestRowThenColumn) {
  // Periodic texture: period 4 in x, 5 in y, so equal-score candidates repeat.
  Image img(128, 128);
  for (int r = 0; r < 128; ++r) {
    for (int c = 0; c < 128; ++c) img(r, c) = 0.1 * (c % 4) + 0.03 * ((r * r) % 5);
  }
  DicParams p;
  const auto s = integer_search(img, img, {64, 64}, p);
  ASSERT_TRUE(s);
  EXPECT_EQ(s->dv, -10);
  EXPECT_EQ(s->du, -8);
}

TEST(IntegerSearch, DegenerateReferenceSubset) {
  const Image flat(128, 128, 0.5);
  EXPECT_FALSE(integer_search(flat, flat, {64, 64}, DicParams{}));
}

// --- icgn_refine -------------------------------------------------------------

TEST_F(SpeckleFixture, IcgnIdentityConvergesImmediately) {
  DicParams p;
  const auto r = icgn_refine(ref(), ref(), {128, 128}, {}, p);
  EXPECT_TRUE(r.converged);
  EXPECT_LE(r.iterations, 1);
  EXPECT_EQ(r.p.u, 0.0);
  EXPECT_EQ(r.p.v, 0.0);
  EXPECT_EQ(r.p.ux, 0.0);
  EXPECT_EQ(r.p.vy, 0.0);
  EXPECT_NEAR(r.zncc, 1.0, 1e-12);
}

TEST_F(SpeckleFixture, IcgnIntegerShiftExact) {
  const Image def = shift_integer(ref(), 5, 0);
  DicParams p;
  WarpParams p0;
  p0.u = 5.0;
  const auto r = icgn_refine(ref(), def, {128, 128}, p0, p);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.p.u, 5.0, 1e-6);
  EXPECT_NEAR(r.p.v, 0.0, 1e-6);
}

TEST_F(SpeckleFixture, IcgnSubpixelShift) {
  DicParams p;
  const auto r = icgn_refine(ref(), def04(), {128, 128}, {}, p);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.p.u, 0.4, 0.02);
  EXPECT_NEAR(r.p.v, 0.0, 0.02);
  EXPECT_GT(r.zncc, 0.99);
  EXPECT_LE(r.last_update_norm, p.convergence_tol);
}

TEST(Icgn, SingularHessianFlagged) {
  // Texture varies only along x: no vertical gradient information.
  Image img(128, 128);
  for (int r = 0; r < 128; ++r) {
    for (int c = 0; c < 128; ++c) img(r, c) = 0.5 + 0.4 * std::sin(0.7 * c);
  }
  const auto r = icgn_refine(img, img, {64, 64}, {}, DicParams{});
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.status, PointStatus::kSingularHessian);
}

TEST(Icgn, DegenerateSubsetFlagged) {
  const Image flat(128, 128, 0.25);
  const auto r = icgn_refine(flat, flat, {64, 64}, {}, DicParams{});
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.status, PointStatus::kDegenerateSubset);
}

TEST_F(SpeckleFixture, IcgnIterationCapRespected) {
  DicParams p;
  p.max_iterations = 1;
  p.convergence_tol = 1e-12;
  WarpParams p0;
  p0.u = 0.9;  // far enough that one step cannot meet the tolerance
  const auto r = icgn_refine(ref(), def04(), {128, 128}, p0, p);
  EXPECT_EQ(r.iterations, 1);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.status, PointStatus::kMaxIterations);
}

// --- correlate ----------------------------------------------------------------

TEST_F(SpeckleFixture, SelfCorrelationIsZeroEverywhere) {
  const auto field = correlate(ref(), ref(), DicParams{});
  ASSERT_GT(field.size(), 0u);
  for (std::size_t k = 0; k < field.size(); ++k) {
    EXPECT_TRUE(field.converged[k]);
    EXPECT_EQ(field.u[k], 0.0);
    EXPECT_EQ(field.v[k], 0.0);
    EXPECT_NEAR(field.zncc[k], 1.0, 1e-9);
  }
}

TEST_F(SpeckleFixture, IntegerShiftRecoveredExactly) {
  const Image def = shift_integer(ref(), 3, 2);
  const auto field = correlate(ref(), def, DicParams{});
  for (std::size_t k = 0; k < field.size(); ++k) {
    EXPECT_TRUE(field.converged[k]);
    EXPECT_NEAR(field.u[k], 3.0, 1e-6);
    EXPECT_NEAR(field.v[k], 2.0, 1e-6);
  }
}

TEST_F(SpeckleFixture, SubpixelShiftAccuracy) {
  const auto field = correlate(ref(), def04(), DicParams{});
  EXPECT_EQ(field.converged_count(), field.size());
  const auto stats = displacement_error(field);
  EXPECT_NEAR(stats.mean_u, 0.4, 0.02);
  EXPECT_LE(stats.std_u, 0.02);
  EXPECT_NEAR(stats.mean_v, 0.0, 0.02);
}

TEST_F(SpeckleFixture, IntensityAffineInvariance) {
  Image scaled = def04();
  for (double& v : scaled.pixels()) v = 0.6 * v + 0.15;
  const auto a = correlate(ref(), def04(), DicParams{});
  const auto b = correlate(ref(), scaled, DicParams{});
  for (std::size_t k = 0; k < a.size(); ++k) {
    ASSERT_EQ(a.converged[k], b.converged[k]);
    EXPECT_NEAR(a.u[k], b.u[k], 1e-6);
    EXPECT_NEAR(a.v[k], b.v[k], 1e-6);
  }
}

TEST_F(SpeckleFixture, SwappedPairNegatesDisplacement) {
  const auto fwd = displacement_error(correlate(ref(), def04(), DicParams{}));
  const auto bwd = displacement_error(correlate(def04(), ref(), DicParams{}));
  EXPECT_NEAR(bwd.mean_u, -fwd.mean_u, 0.04);
  EXPECT_NEAR(bwd.mean_v, -fwd.mean_v, 0.04);
}

TEST_F(SpeckleFixture, ConvergenceBookkeeping) {
  DicParams p;
  p.max_iterations = 3;
  const auto field = correlate(ref(), def04(), p);
  for (std::size_t k = 0; k < field.size(); ++k) {
    EXPECT_LE(field.iterations[k], p.max_iterations);
    if (field.converged[k]) {
      EXPECT_EQ(field.status[k], PointStatus::kConverged);
    }
    EXPECT_LE(std::abs(field.u[k] - p.initial_u), p.search_radius + 1);
    EXPECT_LE(std::abs(field.v[k] - p.initial_v), p.search_radius + 1);
  }
}

TEST_F(SpeckleFixture, FailedPointsAreFlaggedNotThrown) {
  // Blank out the left half of the deformed image.
  Image def = def04();
  for (int r = 0; r < def.height(); ++r) {
    for (int c = 0; c < def.width() / 2; ++c) def(r, c) = 0.5;
  }
  Image ref_blank = ref();
  for (int r = 0; r < ref_blank.height(); ++r) {
    for (int c = 0; c < ref_blank.width() / 2; ++c) ref_blank(r, c) = 0.5;
  }
  const auto field = correlate(ref_blank, def, DicParams{});
  EXPECT_GT(field.converged_count(), 0u);
  EXPECT_LT(field.converged_count(), field.size());
  EXPECT_EQ(field.status.front(), PointStatus::kDegenerateSubset);
}

TEST(Correlate, RejectsMismatchedImages) {
  EXPECT_THROW(correlate(Image(256, 256), Image(256, 200), DicParams{}), DimensionError);
}

TEST(Correlate, DeterministicAcrossThreadCounts) {
  const auto pair = speckle_pair(0.3, 0.7, 256, 3.0, 9);
  DicParams p;
  setenv("FFDIC_THREADS", "1", 1);
  const auto a = correlate(pair.reference, pair.deformed, p);
  setenv("FFDIC_THREADS", "4", 1);
  const auto b = correlate(pair.reference, pair.deformed, p);
  unsetenv("FFDIC_THREADS");
  EXPECT_EQ(a.u, b.u);
  EXPECT_EQ(a.v, b.v);
  EXPECT_EQ(a.iterations, b.iterations);
}

}  // namespace
}  // namespace ffdic
