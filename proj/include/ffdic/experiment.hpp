#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ffdic/dic.hpp"
#include "ffdic/fillfactor.hpp"
#include "ffdic/imaging.hpp"
#include "ffdic/metrics.hpp"
#include "ffdic/parallel.hpp"
#include "ffdic/rng.hpp"
#include "ffdic/strain.hpp"

namespace ffdic {

inline constexpr std::string_view kVersion = "1.0.0";

/// Where sensor noise enters the pipeline.
enum class NoiseStage {
  kFullResolution,  // on the full-resolution frames, before fill-factor resampling
  kResampled,       // on each resampled image, after fill-factor resampling
};

/// One speckle pattern; geometry in full-resolution pixels.
struct PatternConfig {
  std::string label;
  SpeckleSpec speckle;
};

/// Rigid translation in analysis (quarter-resolution) pixels.
struct Translation {
  double dx = 0.0;
  double dy = 0.0;
  friend bool operator==(const Translation&, const Translation&) = default;
};

struct ExperimentConfig {
  int frame_width = 1024;
  int frame_height = 1024;
  std::vector<PatternConfig> patterns;
  std::vector<Translation> translations;
  std::vector<FillFactorScheme> schemes;
  DicParams dic;
  StrainParams strain;
  std::uint64_t seed = 1;
  NoiseStage noise_stage = NoiseStage::kFullResolution;

  void validate() const {
    if (frame_width < 2 || frame_height < 2 || frame_width % 2 != 0 || frame_height % 2 != 0) {
      throw std::invalid_argument("frame dimensions must be even and >= 2");
    }
    for (const auto& p : patterns) p.speckle.validate();
    for (const auto& t : translations) {
      if (!std::isfinite(t.dx) || !std::isfinite(t.dy)) throw std::invalid_argument("translations must be finite");
    }
    dic.validate();
    strain.validate();
  }
};

/// Defaults model the three patterns: 7 px dots, 3 px dots (both high
/// contrast, spacing 1.5x diameter) and the 7 px pattern defocused with a
/// blur sigma equal to its dot diameter. Sizes below are full resolution.
inline std::vector<PatternConfig> default_patterns(std::uint64_t seed, double noise_sigma = 0.005) {
  auto make = [&](std::string label, double diameter, double blur) {
    SpeckleSpec s;
    s.dot_diameter = diameter;
    s.mean_spacing = 1.5 * diameter;
    s.foreground = 0.1;
    s.background = 0.9;
    s.blur_sigma = blur;
    s.noise_sigma = noise_sigma;
    s.seed = seed;
    return PatternConfig{std::move(label), s};
  };
  return {make("a", 14.0, 0.0), make("b", 6.0, 0.0), make("c", 14.0, 14.0)};
}

inline ExperimentConfig default_config(std::uint64_t seed = 1) {
  ExperimentConfig cfg;
  cfg.seed = seed;
  cfg.patterns = default_patterns(seed);
  cfg.translations = {{64.0, 0.0}, {0.0, 0.4}};
  cfg.schemes = {kAllSchemes.begin(), kAllSchemes.end()};
  return cfg;
}

/// Same experiment at the original sensor geometry (2560x2160 frame,
/// 800x800 analysis ROI).
inline ExperimentConfig paper_scale_config(std::uint64_t seed = 1) {
  ExperimentConfig cfg = default_config(seed);
  cfg.frame_width = 2560;
  cfg.frame_height = 2160;
  cfg.dic.roi = Roi{(1280 - 800) / 2, (1080 - 800) / 2, 800, 800};
  return cfg;
}

/// Optional percentage increases relative to the FF100 cell of the same
/// (pattern, translation) group.
struct PercentIncrease {
  std::optional<double> std_u, std_v, std_exx, std_eyy, std_exy;
};

struct ResultCell {
  std::string pattern;
  FillFactorScheme scheme = FillFactorScheme::kFF100;
  Translation translation;
  bool ok = false;
  std::string error;
  ErrorStats stats;
  PercentIncrease pct;
  double bias_u() const { return stats.displacement.mean_u - translation.dx; }
  double bias_v() const { return stats.displacement.mean_v - translation.dy; }
};

struct ErrorReport {
  ExperimentConfig config;
  std::vector<ResultCell> cells;  // pattern-major, then translation, then scheme
  bool any_failed() const {
    for (const auto& c : cells) {
      if (!c.ok) return true;
    }
    return false;
  }
  const ResultCell* find(std::string_view pattern, FillFactorScheme scheme, Translation t) const {
    for (const auto& c : cells) {
      if (c.pattern == pattern && c.scheme == scheme && c.translation == t) return &c;
    }
    return nullptr;
  }
};

namespace detail {

/// Noise seed for one image of the experiment; index encodes pattern,
/// frame (0 = reference, 1 + t = translation t) and scheme slot.
inline std::uint64_t noise_seed(std::uint64_t seed, std::size_t pattern, std::size_t frame, std::size_t scheme) {
  return substream_seed(seed, Stream::kNoise, (pattern << 32) | (frame << 8) | scheme);
}

inline void fill_percent_increases(std::vector<ResultCell>& cells) {
  auto pct = [](double err, double base) -> std::optional<double> {
    if (!(base > 0.0)) return std::nullopt;
    return percent_increase(err, base);
  };
  for (auto& cell : cells) {
    if (!cell.ok) continue;
    if (cell.scheme == FillFactorScheme::kFF100) {
      cell.pct = {0.0, 0.0, 0.0, 0.0, 0.0};
      continue;
    }
    const ResultCell* base = nullptr;
    for (const auto& other : cells) {
      if (other.ok && other.scheme == FillFactorScheme::kFF100 && other.pattern == cell.pattern &&
          other.translation == cell.translation) {
        base = &other;
      }
    }
    if (!base) continue;
    const auto& d = cell.stats.displacement;
    const auto& s = cell.stats.strain;
    const auto& bd = base->stats.displacement;
    const auto& bs = base->stats.strain;
    cell.pct = {pct(d.std_u, bd.std_u), pct(d.std_v, bd.std_v), pct(s.std_exx, bs.std_exx),
                pct(s.std_eyy, bs.std_eyy), pct(s.std_exy, bs.std_exy)};
  }
}

}  // namespace detail

/// Runs every (pattern x translation x scheme) cell. Each pattern's dots are
/// generated once; the reference and translated frames are rendered at full
/// resolution with shift = 2 x the analysis-pixel translation, resampled by
/// each scheme and correlated with the nominal translation as the initial
/// guess. Cell failures are recorded, never thrown.
inline ErrorReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  ErrorReport report;
  report.config = config;

  const int fw = config.frame_width;
  const int fh = config.frame_height;
  const std::size_t nt = config.translations.size();
  const std::size_t ns = config.schemes.size();

  for (std::size_t pi = 0; pi < config.patterns.size(); ++pi) {
    const PatternConfig& pattern = config.patterns[pi];
    const SpeckleSpec& spec = pattern.speckle;
    std::vector<ResultCell> cells(nt * ns);
    for (std::size_t ti = 0; ti < nt; ++ti) {
      for (std::size_t si = 0; si < ns; ++si) {
        auto& cell = cells[ti * ns + si];
        cell.pattern = pattern.label;
        cell.scheme = config.schemes[si];
        cell.translation = config.translations[ti];
      }
    }
    if (ns == 0 || nt == 0) continue;

    std::optional<DotSet> dots;
    std::vector<Image> frames;  // [0] reference, [1 + t] translated
    try {
      dots = generate_dots(spec, fw, fh);
      frames.resize(nt + 1);
      for (std::size_t f = 0; f <= nt; ++f) {
        const double dx = f == 0 ? 0.0 : 2.0 * config.translations[f - 1].dx;
        const double dy = f == 0 ? 0.0 : 2.0 * config.translations[f - 1].dy;
        frames[f] = render(*dots, spec, dx, dy, fw, fh);
        if (config.noise_stage == NoiseStage::kFullResolution) {
          frames[f] = add_noise(frames[f], spec.noise_sigma, detail::noise_seed(config.seed, pi, f, 0));
        }
      }
    } catch (const std::exception& e) {
      for (auto& cell : cells) cell.error = e.what();
      report.cells.insert(report.cells.end(), cells.begin(), cells.end());
      continue;
    }

    // Resample the reference once per scheme.
    std::vector<Image> refs(ns);
    std::vector<std::string> ref_errors(ns);
    for (std::size_t si = 0; si < ns; ++si) {
      try {
        refs[si] = resample(frames[0], config.schemes[si]);
        if (config.noise_stage == NoiseStage::kResampled) {
          refs[si] = add_noise(refs[si], spec.noise_sigma, detail::noise_seed(config.seed, pi, 0, si));
        }
      } catch (const std::exception& e) {
        ref_errors[si] = e.what();
      }
    }

    parallel_for(cells.size(), [&](std::size_t k) {
      const std::size_t ti = k / ns;
      const std::size_t si = k % ns;
      ResultCell& cell = cells[k];
      try {
        if (!ref_errors[si].empty()) throw std::runtime_error(ref_errors[si]);
        Image def = resample(frames[ti + 1], cell.scheme);
        if (config.noise_stage == NoiseStage::kResampled) {
          def = add_noise(def, spec.noise_sigma, detail::noise_seed(config.seed, pi, ti + 1, si));
        }
        DicParams params = config.dic;
        params.initial_u = cell.translation.dx;
        params.initial_v = cell.translation.dy;
        const DisplacementField field = correlate(refs[si], def, params);
        cell.stats.displacement = displacement_error(field);
        cell.stats.strain = strain_error(strain_field(field, config.strain));
        cell.ok = true;
      } catch (const std::exception& e) {
        cell.ok = false;
        cell.error = e.what();
      }
    });
    report.cells.insert(report.cells.end(), cells.begin(), cells.end());
  }
  detail::fill_percent_increases(report.cells);
  return report;
}

}  // namespace ffdic
