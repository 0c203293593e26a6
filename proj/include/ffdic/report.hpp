#pragma once

#include <nlohmann/json.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <string>

#include "ffdic/experiment.hpp"
#include "ffdic/io.hpp"
#include "ffdic/rng.hpp"

namespace ffdic {

/// Rejected configuration content (unknown keys, wrong types, bad values).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& obj, std::initializer_list<std::string_view> allowed,
                                std::string_view where) {
  if (!obj.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError("unknown key '" + key + "' in " + std::string(where));
  }
}

template <typename T>
void read_key(const nlohmann::json& obj, const char* key, T& out, std::string_view where) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string(where) + "." + key + " has the wrong type");
  }
}

inline std::string_view to_string(NoiseStage s) {
  return s == NoiseStage::kFullResolution ? "full_resolution" : "resampled";
}

}  // namespace detail

// DIC parameters use analysis-image pixels.
inline DicParams dic_params_from_json(const nlohmann::json& j, DicParams p = {}) {
  detail::reject_unknown_keys(j,
                              {"subset_size_px", "step_px", "roi_px", "search_radius_px", "max_iterations",
                               "convergence_tol_px", "initial_u_px", "initial_v_px"},
                              "dic");
  detail::read_key(j, "subset_size_px", p.subset_size, "dic");
  detail::read_key(j, "step_px", p.step, "dic");
  detail::read_key(j, "search_radius_px", p.search_radius, "dic");
  detail::read_key(j, "max_iterations", p.max_iterations, "dic");
  detail::read_key(j, "convergence_tol_px", p.convergence_tol, "dic");
  detail::read_key(j, "initial_u_px", p.initial_u, "dic");
  detail::read_key(j, "initial_v_px", p.initial_v, "dic");
  if (auto it = j.find("roi_px"); it != j.end()) {
    if (it->is_null()) {
      p.roi.reset();
    } else {
      detail::reject_unknown_keys(*it, {"x0", "y0", "width", "height"}, "dic.roi_px");
      Roi roi;
      detail::read_key(*it, "x0", roi.x0, "dic.roi_px");
      detail::read_key(*it, "y0", roi.y0, "dic.roi_px");
      detail::read_key(*it, "width", roi.width, "dic.roi_px");
      detail::read_key(*it, "height", roi.height, "dic.roi_px");
      p.roi = roi;
    }
  }
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("dic: ") + e.what());
  }
  return p;
}

inline nlohmann::json to_json(const DicParams& p) {
  nlohmann::json j = {{"subset_size_px", p.subset_size},       {"step_px", p.step},
                      {"search_radius_px", p.search_radius},   {"max_iterations", p.max_iterations},
                      {"convergence_tol_px", p.convergence_tol}, {"initial_u_px", p.initial_u},
                      {"initial_v_px", p.initial_v}};
  if (p.roi) {
    j["roi_px"] = {{"x0", p.roi->x0}, {"y0", p.roi->y0}, {"width", p.roi->width}, {"height", p.roi->height}};
  } else {
    j["roi_px"] = nullptr;
  }
  return j;
}

/// Parses an experiment config. Every key is optional; absent keys keep the
/// defaults. Pattern geometry is given in analysis (quarter-resolution)
/// pixels and doubled for rendering.
inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  detail::reject_unknown_keys(j,
                              {"frame_width_px_full", "frame_height_px_full", "seed", "noise_stage", "schemes",
                               "translations", "patterns", "dic", "strain"},
                              "config");
  ExperimentConfig cfg;
  detail::read_key(j, "seed", cfg.seed, "config");
  cfg = default_config(cfg.seed);
  detail::read_key(j, "frame_width_px_full", cfg.frame_width, "config");
  detail::read_key(j, "frame_height_px_full", cfg.frame_height, "config");

  if (auto it = j.find("noise_stage"); it != j.end()) {
    const auto s = it->get<std::string>();
    if (s == "full_resolution") {
      cfg.noise_stage = NoiseStage::kFullResolution;
    } else if (s == "resampled") {
      cfg.noise_stage = NoiseStage::kResampled;
    } else {
      throw ConfigError("noise_stage must be 'full_resolution' or 'resampled'");
    }
  }
  if (auto it = j.find("schemes"); it != j.end()) {
    cfg.schemes.clear();
    for (const auto& s : *it) {
      auto scheme = s.is_string() ? parse_scheme(s.get<std::string>()) : std::nullopt;
      if (!scheme) throw ConfigError("unknown scheme " + s.dump());
      cfg.schemes.push_back(*scheme);
    }
  }
  if (auto it = j.find("translations"); it != j.end()) {
    cfg.translations.clear();
    for (const auto& t : *it) {
      detail::reject_unknown_keys(t, {"dx_px_quarter", "dy_px_quarter"}, "translations[]");
      Translation tr;
      detail::read_key(t, "dx_px_quarter", tr.dx, "translations[]");
      detail::read_key(t, "dy_px_quarter", tr.dy, "translations[]");
      cfg.translations.push_back(tr);
    }
  }
  if (auto it = j.find("patterns"); it != j.end()) {
    cfg.patterns.clear();
    for (const auto& p : *it) {
      detail::reject_unknown_keys(p,
                                  {"label", "dot_diameter_px_quarter", "mean_spacing_px_quarter", "foreground",
                                   "background", "blur_sigma_px_quarter", "noise_sigma", "seed"},
                                  "patterns[]");
      PatternConfig pc;
      pc.speckle.seed = cfg.seed;
      pc.speckle.noise_sigma = 0.005;
      double diameter_q = pc.speckle.dot_diameter / 2.0;
      double spacing_q = pc.speckle.mean_spacing / 2.0;
      double blur_q = 0.0;
      detail::read_key(p, "label", pc.label, "patterns[]");
      detail::read_key(p, "dot_diameter_px_quarter", diameter_q, "patterns[]");
      detail::read_key(p, "mean_spacing_px_quarter", spacing_q, "patterns[]");
      detail::read_key(p, "blur_sigma_px_quarter", blur_q, "patterns[]");
      detail::read_key(p, "foreground", pc.speckle.foreground, "patterns[]");
      detail::read_key(p, "background", pc.speckle.background, "patterns[]");
      detail::read_key(p, "noise_sigma", pc.speckle.noise_sigma, "patterns[]");
      detail::read_key(p, "seed", pc.speckle.seed, "patterns[]");
      pc.speckle.dot_diameter = 2.0 * diameter_q;
      pc.speckle.mean_spacing = 2.0 * spacing_q;
      pc.speckle.blur_sigma = 2.0 * blur_q;
      if (pc.label.empty()) pc.label = "p" + std::to_string(cfg.patterns.size());
      cfg.patterns.push_back(pc);
    }
  }
  if (auto it = j.find("dic"); it != j.end()) cfg.dic = dic_params_from_json(*it, cfg.dic);
  if (auto it = j.find("strain"); it != j.end()) {
    detail::reject_unknown_keys(*it, {"window_points"}, "strain");
    detail::read_key(*it, "window_points", cfg.strain.window_points, "strain");
  }
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

inline nlohmann::json to_json(const ExperimentConfig& cfg) {
  nlohmann::json patterns = nlohmann::json::array();
  for (const auto& p : cfg.patterns) {
    patterns.push_back({{"label", p.label},
                        {"dot_diameter_px_quarter", p.speckle.dot_diameter / 2.0},
                        {"mean_spacing_px_quarter", p.speckle.mean_spacing / 2.0},
                        {"foreground", p.speckle.foreground},
                        {"background", p.speckle.background},
                        {"blur_sigma_px_quarter", p.speckle.blur_sigma / 2.0},
                        {"noise_sigma", p.speckle.noise_sigma},
                        {"seed", p.speckle.seed}});
  }
  nlohmann::json translations = nlohmann::json::array();
  for (const auto& t : cfg.translations) translations.push_back({{"dx_px_quarter", t.dx}, {"dy_px_quarter", t.dy}});
  nlohmann::json schemes = nlohmann::json::array();
  for (auto s : cfg.schemes) schemes.push_back(std::string(to_string(s)));
  nlohmann::json dic = to_json(cfg.dic);
  dic.erase("initial_u_px");
  dic.erase("initial_v_px");
  return {{"frame_width_px_full", cfg.frame_width},
          {"frame_height_px_full", cfg.frame_height},
          {"seed", cfg.seed},
          {"noise_stage", detail::to_string(cfg.noise_stage)},
          {"schemes", schemes},
          {"translations", translations},
          {"patterns", patterns},
          {"dic", dic},
          {"strain", {{"window_points", cfg.strain.window_points}}}};
}

namespace detail {

inline nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

}  // namespace detail

inline nlohmann::json to_json(const ResultCell& c) {
  nlohmann::json j = {{"pattern", c.pattern},
                      {"scheme", std::string(to_string(c.scheme))},
                      {"dx_px", c.translation.dx},
                      {"dy_px", c.translation.dy},
                      {"ok", c.ok}};
  if (!c.ok) {
    j["error"] = c.error;
    return j;
  }
  const auto& d = c.stats.displacement;
  const auto& s = c.stats.strain;
  j["displacement"] = {{"mean_u", d.mean_u},         {"mean_v", d.mean_v},   {"std_u", d.std_u},
                       {"std_v", d.std_v},           {"bias_u", c.bias_u()}, {"bias_v", c.bias_v()},
                       {"n_points", d.n_points},     {"n_converged", d.n_converged}};
  j["strain"] = {{"mean_exx", s.mean_exx}, {"mean_eyy", s.mean_eyy}, {"mean_exy", s.mean_exy},
                 {"std_exx", s.std_exx},   {"std_eyy", s.std_eyy},   {"std_exy", s.std_exy},
                 {"n_points", s.n_points}};
  j["pct_increase"] = {{"std_u", detail::optional_json(c.pct.std_u)},
                       {"std_v", detail::optional_json(c.pct.std_v)},
                       {"std_exx", detail::optional_json(c.pct.std_exx)},
                       {"std_eyy", detail::optional_json(c.pct.std_eyy)},
                       {"std_exy", detail::optional_json(c.pct.std_exy)}};
  return j;
}

/// Full report document. The timestamp is the only field that varies
/// between runs of the same config.
inline nlohmann::json to_json(const ErrorReport& report, bool with_timestamp = true) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : report.cells) cells.push_back(to_json(c));
  nlohmann::json j = {{"software", {{"name", "ffdic"}, {"version", std::string(kVersion)}}},
                      {"prng", std::string(kPrngName)},
                      {"seed", report.config.seed},
                      {"statistics", "population mean and standard deviation over converged points"},
                      {"assumptions",
                       {{"noise_sigma", "sensor noise level is assumed, not measured"},
                        {"blurred_pattern", "defocus blur sigma is a free parameter; results are directional"}}},
                      {"config", to_json(report.config)},
                      {"any_failed", report.any_failed()},
                      {"cells", cells}};
  if (with_timestamp) j["generated_at"] = detail::utc_timestamp();
  return j;
}

inline constexpr const char* kSummaryCsvHeader =
    "pattern,scheme,dx,dy,mean_u,mean_v,std_u,std_v,std_exx,std_eyy,std_exy,"
    "pct_inc_std_u,pct_inc_std_v,pct_inc_std_exx,pct_inc_std_eyy,n_converged,n_points";

namespace detail {

inline std::string csv_number(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

inline std::string csv_number(const std::optional<double>& v) { return v ? csv_number(*v) : std::string(); }

inline std::string translation_tag(const Translation& t) {
  std::ostringstream os;
  os << "dx" << std::setprecision(6) << t.dx << "_dy" << t.dy;
  return os.str();
}

}  // namespace detail

inline void write_summary_csv(std::ostream& os, const ErrorReport& report) {
  os << kSummaryCsvHeader << '\n';
  using detail::csv_number;
  for (const auto& c : report.cells) {
    os << c.pattern << ',' << to_string(c.scheme) << ',' << csv_number(c.translation.dx) << ','
       << csv_number(c.translation.dy);
    if (!c.ok) {
      os << std::string(11, ',') << ",0," << c.stats.displacement.n_points << '\n';
      continue;
    }
    const auto& d = c.stats.displacement;
    const auto& s = c.stats.strain;
    os << ',' << csv_number(d.mean_u) << ',' << csv_number(d.mean_v) << ',' << csv_number(d.std_u) << ','
       << csv_number(d.std_v) << ',' << csv_number(s.std_exx) << ',' << csv_number(s.std_eyy) << ','
       << csv_number(s.std_exy) << ',' << csv_number(c.pct.std_u) << ',' << csv_number(c.pct.std_v) << ','
       << csv_number(c.pct.std_exx) << ',' << csv_number(c.pct.std_eyy) << ',' << d.n_converged << ','
       << d.n_points << '\n';
  }
}

/// Writes report.json, summary.csv and one bar-chart table per
/// (pattern, translation) group under plots/.
inline void emit_report(const ErrorReport& report, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir / "plots", ec);
  if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());

  auto open = [](const fs::path& p) {
    std::ofstream os(p);
    if (!os) throw IoError("cannot write " + p.string());
    return os;
  };
  {
    auto os = open(out_dir / "report.json");
    os << to_json(report).dump(2) << '\n';
  }
  {
    auto os = open(out_dir / "summary.csv");
    write_summary_csv(os, report);
  }
  std::set<std::pair<std::string, std::string>> written;
  for (const auto& c : report.cells) {
    const std::string tag = detail::translation_tag(c.translation);
    if (!written.emplace(c.pattern, tag).second) continue;
    auto os = open(out_dir / "plots" / (c.pattern + "_" + tag + ".csv"));
    os << "scheme,areal_fill_factor,std_u,std_v,std_exx,std_eyy,std_exy,pct_inc_std_u,pct_inc_std_v,"
          "pct_inc_std_exx,pct_inc_std_eyy\n";
    for (const auto& o : report.cells) {
      if (o.pattern != c.pattern || !(o.translation == c.translation)) continue;
      using detail::csv_number;
      os << to_string(o.scheme) << ',' << linear_fill_factor(o.scheme).areal();
      if (o.ok) {
        const auto& d = o.stats.displacement;
        const auto& s = o.stats.strain;
        os << ',' << csv_number(d.std_u) << ',' << csv_number(d.std_v) << ',' << csv_number(s.std_exx) << ','
           << csv_number(s.std_eyy) << ',' << csv_number(s.std_exy) << ',' << csv_number(o.pct.std_u) << ','
           << csv_number(o.pct.std_v) << ',' << csv_number(o.pct.std_exx) << ',' << csv_number(o.pct.std_eyy);
      } else {
        os << ",,,,,,,,,";
      }
      os << '\n';
    }
  }
}

}  // namespace ffdic
