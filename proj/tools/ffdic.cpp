// ffdic: command-line front end for the fill-factor DIC toolkit.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "ffdic/dic.hpp"
#include "ffdic/experiment.hpp"
#include "ffdic/fillfactor.hpp"
#include "ffdic/imaging.hpp"
#include "ffdic/io.hpp"
#include "ffdic/report.hpp"
#include "ffdic/strain.hpp"

namespace {

nlohmann::json load_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ffdic::IoError("cannot open " + path);
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw ffdic::ConfigError(path + ": " + e.what());
  }
}

struct SpeckleArgs {
  int width = 1024;
  int height = 1024;
  ffdic::SpeckleSpec spec;
  std::uint64_t noise_seed = 0;
  double shift_x = 0.0;
  double shift_y = 0.0;
  std::string dots_in, dots_out, out;
};

int run_speckle(const SpeckleArgs& a) {
  ffdic::DotSet dots;
  if (!a.dots_in.empty()) {
    dots = ffdic::dots_from_json(load_json(a.dots_in));
  } else {
    dots = ffdic::generate_dots(a.spec, a.width, a.height);
  }
  if (!a.dots_out.empty()) {
    std::ofstream os(a.dots_out);
    if (!os) throw ffdic::IoError("cannot write " + a.dots_out);
    os << ffdic::to_json(dots).dump() << '\n';
  }
  if (!a.out.empty()) {
    ffdic::Image img = ffdic::render(dots, a.spec, a.shift_x, a.shift_y, a.width, a.height);
    img = ffdic::add_noise(img, a.spec.noise_sigma, a.noise_seed);
    ffdic::write_pgm(a.out, img);
  }
  return 0;
}

int run_dic(const std::string& ref_path, const std::string& def_path, const std::string& config_path,
            const std::string& out_path) {
  ffdic::DicParams params;
  if (!config_path.empty()) params = ffdic::dic_params_from_json(load_json(config_path));
  const auto ref = ffdic::read_pgm(ref_path);
  const auto def = ffdic::read_pgm(def_path);
  const auto field = ffdic::correlate(ref, def, params);
  std::ofstream os(out_path);
  if (!os) throw ffdic::IoError("cannot write " + out_path);
  ffdic::write_field_csv(os, field);
  std::cerr << field.converged_count() << "/" << field.size() << " points converged\n";
  return 0;
}

int run_strain(const std::string& field_path, int window, const std::string& out_path) {
  std::ifstream is(field_path);
  if (!is) throw ffdic::IoError("cannot open " + field_path);
  const auto field = ffdic::read_field_csv(is);
  const auto strain = ffdic::strain_field(field, ffdic::StrainParams{window});
  std::ofstream os(out_path);
  if (!os) throw ffdic::IoError("cannot write " + out_path);
  ffdic::write_strain_csv(os, strain);
  return 0;
}

int run_experiment(const std::string& config_path, const std::string& preset, const std::string& out_dir) {
  ffdic::ExperimentConfig cfg;
  if (!config_path.empty()) {
    cfg = ffdic::experiment_config_from_json(load_json(config_path));
  } else if (preset == "paper-scale") {
    cfg = ffdic::paper_scale_config();
  } else {
    cfg = ffdic::default_config();
  }
  const auto report = ffdic::run_experiment(cfg);
  ffdic::emit_report(report, out_dir);
  std::size_t failed = 0;
  for (const auto& c : report.cells) {
    if (!c.ok) {
      ++failed;
      std::cerr << "cell " << c.pattern << "/" << ffdic::to_string(c.scheme) << " (" << c.translation.dx << ", "
                << c.translation.dy << ") failed: " << c.error << '\n';
    }
  }
  std::cerr << report.cells.size() - failed << "/" << report.cells.size() << " cells ok, results in " << out_dir
            << '\n';
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fill-factor digital image correlation toolkit"};
  app.require_subcommand(1);

  // speckle generate
  auto* speckle = app.add_subcommand("speckle", "Speckle pattern synthesis");
  speckle->require_subcommand(1);
  auto* generate = speckle->add_subcommand("generate", "Generate dots and/or render a (shifted) frame");
  SpeckleArgs sa;
  generate->add_option("--width", sa.width, "Frame width in full-resolution pixels")->capture_default_str();
  generate->add_option("--height", sa.height, "Frame height in full-resolution pixels")->capture_default_str();
  generate->add_option("--diameter", sa.spec.dot_diameter, "Dot diameter, full-resolution pixels")
      ->capture_default_str();
  generate->add_option("--spacing", sa.spec.mean_spacing, "Mean dot spacing, full-resolution pixels")
      ->capture_default_str();
  generate->add_option("--foreground", sa.spec.foreground, "Dot intensity in [0,1]")->capture_default_str();
  generate->add_option("--background", sa.spec.background, "Background intensity in [0,1]")->capture_default_str();
  generate->add_option("--blur", sa.spec.blur_sigma, "Defocus blur sigma, pixels")->capture_default_str();
  generate->add_option("--noise", sa.spec.noise_sigma, "Gaussian noise sigma, intensity units")
      ->capture_default_str();
  generate->add_option("--seed", sa.spec.seed, "Dot placement seed")->capture_default_str();
  generate->add_option("--noise-seed", sa.noise_seed, "Noise seed")->capture_default_str();
  generate->add_option("--shift-x", sa.shift_x, "Horizontal translation, full-resolution pixels");
  generate->add_option("--shift-y", sa.shift_y, "Vertical translation, full-resolution pixels");
  generate->add_option("--dots-in", sa.dots_in, "Render an existing dot set (JSON) instead of generating");
  generate->add_option("--dots-out", sa.dots_out, "Write the dot set as JSON");
  generate->add_option("--out", sa.out, "Write the rendered frame as 16-bit PGM");

  // ff resample
  auto* ff = app.add_subcommand("ff", "Fill-factor resampling");
  ff->require_subcommand(1);
  auto* resample = ff->add_subcommand("resample", "Produce a half-size image with a simulated fill factor");
  std::string scheme_name, ff_in, ff_out;
  resample->add_option("--scheme", scheme_name, "ff100 | ff50 | ff25")
      ->required()
      ->check(CLI::IsMember({"ff100", "ff50", "ff25"}, CLI::ignore_case));
  resample->add_option("--in", ff_in, "Input PGM")->required();
  resample->add_option("--out", ff_out, "Output PGM")->required();

  // dic run
  auto* dic = app.add_subcommand("dic", "Subset correlation");
  dic->require_subcommand(1);
  auto* dic_run = dic->add_subcommand("run", "Correlate a reference/deformed pair");
  std::string ref_path, def_path, dic_config, field_out;
  dic_run->add_option("--ref", ref_path, "Reference PGM")->required();
  dic_run->add_option("--def", def_path, "Deformed PGM")->required();
  dic_run->add_option("--config", dic_config, "DIC parameter JSON");
  dic_run->add_option("--out", field_out, "Displacement field CSV")->required();

  // strain
  auto* strain = app.add_subcommand("strain", "Strain from a displacement field CSV");
  std::string field_in, strain_out;
  int window = 7;
  strain->add_option("--field", field_in, "Displacement field CSV")->required();
  strain->add_option("--window", window, "Strain window size in grid points (odd)")->capture_default_str();
  strain->add_option("--out", strain_out, "Strain CSV")->required();

  // experiment run
  auto* experiment = app.add_subcommand("experiment", "Full fill-factor experiment");
  experiment->require_subcommand(1);
  auto* exp_run = experiment->add_subcommand("run", "Run all pattern x scheme x translation cells");
  std::string exp_config, preset = "desk", out_dir = "results";
  exp_run->add_option("--config", exp_config, "Experiment config JSON (defaults used when omitted)");
  exp_run->add_option("--preset", preset, "Built-in config when --config is absent")
      ->check(CLI::IsMember({"desk", "paper-scale"}))
      ->capture_default_str();
  exp_run->add_option("--out-dir", out_dir, "Output directory")->capture_default_str();
  auto* exp_default = experiment->add_subcommand("default-config", "Print the default config as JSON");

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) return run_speckle(sa);
    if (resample->parsed()) {
      const auto scheme = ffdic::parse_scheme(scheme_name);
      ffdic::write_pgm(ff_out, ffdic::resample(ffdic::read_pgm(ff_in), *scheme));
      return 0;
    }
    if (dic_run->parsed()) return run_dic(ref_path, def_path, dic_config, field_out);
    if (strain->parsed()) return run_strain(field_in, window, strain_out);
    if (exp_run->parsed()) return run_experiment(exp_config, preset, out_dir);
    if (exp_default->parsed()) {
      std::cout << ffdic::to_json(ffdic::default_config()).dump(2) << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "ffdic: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
