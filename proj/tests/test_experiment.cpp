#include "ffdic/experiment.hpp"
#include "ffdic/report.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace ffdic {
namespace {

// 256 px analysis frames keep each run to a fraction of a second.
ExperimentConfig small_config() {
  ExperimentConfig cfg = default_config(1);
  cfg.frame_width = cfg.frame_height = 512;
  cfg.dic.roi = Roi{28, 28, 200, 200};
  cfg.translations = {{4.0, 0.0}, {0.0, 0.4}};
  return cfg;
}

int count_lines(const std::filesystem::path& p) {
  std::ifstream is(p);
  int n = 0;
  for (std::string line; std::getline(is, line);) ++n;
  return n;
}

TEST(Experiment, ZeroTranslationWithoutNoiseGivesZeroError) {
  auto cfg = small_config();
  cfg.translations = {{0.0, 0.0}};
  for (auto& p : cfg.patterns) p.speckle.noise_sigma = 0.0;
  const auto r = run_experiment(cfg);
  ASSERT_EQ(r.cells.size(), 9u);
  for (const auto& c : r.cells) {
    ASSERT_TRUE(c.ok) << c.error;
    EXPECT_EQ(c.stats.displacement.mean_u, 0.0);
    EXPECT_EQ(c.stats.displacement.std_u, 0.0);
    EXPECT_EQ(c.stats.displacement.std_v, 0.0);
    EXPECT_EQ(c.stats.strain.std_exx, 0.0);
    EXPECT_EQ(c.stats.strain.std_exy, 0.0);
  }
}

TEST(Experiment, FullGridOfCellsAndBaselines) {
  const auto r = run_experiment(small_config());
  ASSERT_EQ(r.cells.size(), 18u);
  EXPECT_FALSE(r.any_failed());
  for (const auto& c : r.cells) {
    ASSERT_TRUE(c.ok) << c.error;
    if (c.scheme == FillFactorScheme::kFF100) {
      EXPECT_EQ(c.pct.std_u, 0.0);
      EXPECT_EQ(c.pct.std_eyy, 0.0);
    } else {
      const auto* base = r.find(c.pattern, FillFactorScheme::kFF100, c.translation);
      ASSERT_NE(base, nullptr);
      ASSERT_TRUE(c.pct.std_u.has_value());
      EXPECT_NEAR(*c.pct.std_u, percent_increase(c.stats.displacement.std_u, base->stats.displacement.std_u),
                  1e-9);
    }
    EXPECT_LT(std::abs(c.bias_u()), 0.1);
    EXPECT_LT(std::abs(c.bias_v()), 0.1);
  }
}

TEST(Experiment, EmptySchemeListIsValid) {
  auto cfg = small_config();
  cfg.schemes.clear();
  const auto r = run_experiment(cfg);
  EXPECT_TRUE(r.cells.empty());
  EXPECT_FALSE(r.any_failed());
  const auto j = nlohmann::json::parse(to_json(r).dump());
  EXPECT_TRUE(j["cells"].empty());
  std::ostringstream csv;
  write_summary_csv(csv, r);
  EXPECT_EQ(csv.str(), std::string(kSummaryCsvHeader) + "\n");
}

TEST(Experiment, DeterministicReport) {
  const auto cfg = small_config();
  const auto a = to_json(run_experiment(cfg), false).dump();
  const auto b = to_json(run_experiment(cfg), false).dump();
  EXPECT_EQ(a, b);
}

TEST(Experiment, SeedChangesResults) {
  auto cfg = small_config();
  cfg.patterns.resize(1);
  cfg.schemes = {FillFactorScheme::kFF100};
  const auto a = run_experiment(cfg);
  cfg.seed = 2;
  cfg.patterns = default_patterns(2);
  cfg.patterns.resize(1);
  const auto b = run_experiment(cfg);
  EXPECT_NE(a.cells[0].stats.displacement.std_u, b.cells[0].stats.displacement.std_u);
}

TEST(Experiment, CellFailuresAreReportedNotThrown) {
  auto cfg = small_config();
  cfg.translations = {{4.0, 0.0}, {60.0, 0.0}};  // second shift leaves the ROI margin
  cfg.patterns.resize(1);
  const auto r = run_experiment(cfg);
  ASSERT_EQ(r.cells.size(), 6u);
  EXPECT_TRUE(r.any_failed());
  for (const auto& c : r.cells) {
    if (c.translation.dx == 4.0) {
      EXPECT_TRUE(c.ok) << c.error;
    } else {
      EXPECT_FALSE(c.ok);
      EXPECT_FALSE(c.error.empty());
    }
  }
  const auto j = to_json(r);
  EXPECT_TRUE(j["any_failed"].get<bool>());
}

TEST(Experiment, EmitWritesAllOutputs) {
  const auto dir = std::filesystem::temp_directory_path() / "ffdic_emit_test";
  std::filesystem::remove_all(dir);
  const auto r = run_experiment(small_config());
  emit_report(r, dir);
  EXPECT_EQ(count_lines(dir / "summary.csv"), 19);
  std::ifstream js(dir / "report.json");
  const auto j = nlohmann::json::parse(js);
  EXPECT_EQ(j["cells"].size(), 18u);
  EXPECT_EQ(j["software"]["version"], "1.0.0");
  EXPECT_TRUE(j.contains("generated_at"));
  EXPECT_EQ(j["prng"], std::string(kPrngName));
  int plots = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir / "plots")) {
    ++plots;
    EXPECT_EQ(count_lines(e.path()), 4);
  }
  EXPECT_EQ(plots, 6);
  std::filesystem::remove_all(dir);
}

TEST(Experiment, ResampledNoiseStageRuns) {
  auto cfg = small_config();
  cfg.noise_stage = NoiseStage::kResampled;
  cfg.patterns.resize(1);
  const auto r = run_experiment(cfg);
  EXPECT_FALSE(r.any_failed());
  EXPECT_EQ(to_json(r)["config"]["noise_stage"], "resampled");
}

}  // namespace
}  // namespace ffdic
