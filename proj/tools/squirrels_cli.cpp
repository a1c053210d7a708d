// Command-line front end: simulate spectrograms, reconstruct density
// matrices and analyse the results.
//
// Exit status: 0 success, 1 invalid input or configuration, 2 numerical failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "squirrels/squirrels.hpp"

namespace {

using namespace squirrels;
namespace fs = std::filesystem;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::string format = "csv";
  std::string input;
};

RunConfig load_config(const Common& c) {
  RunConfig cfg = c.config_path.empty() ? run_config_from_json(Json::object())
                                        : run_config_from_json(parse_json_text(read_text_file(c.config_path), c.config_path));
  if (c.seed) {
    cfg.seed = *c.seed;
    cfg.benchmark.seed = *c.seed;
  }
  return cfg;
}

std::string out_path(const Common& c, const std::string& name) {
  fs::create_directories(c.out_dir);
  return (fs::path(c.out_dir) / name).string();
}

std::string input_or(const Common& c, const std::string& fallback) {
  return c.input.empty() ? (fs::path(c.out_dir) / fallback).string() : c.input;
}

void write_json(const std::string& path, const Json& j) { write_text_file(path, j.dump(2) + "\n"); }

/// CSV with a header row.
std::string table_csv(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::string out;
  for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + header[i];
  out += "\n";
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + r[i];
    out += "\n";
  }
  return out;
}

Json spectrogram_to_json(const Spectrogram& s) {
  Json rows = Json::array();
  for (int r = 0; r < s.rows(); ++r) {
    Json row = Json::array();
    for (int c = 0; c < s.columns(); ++c) row.push_back(s.populations(r, c));
    rows.push_back(std::move(row));
  }
  return Json{{"theta", s.theta_grid}, {"window", window_to_json(s.window)}, {"populations", std::move(rows)}};
}

// ---------------------------------------------------------------------------

void run_simulate(const Common& c) {
  const RunConfig cfg = load_config(c);
  const DensityMatrix truth = prepared_density(cfg);
  Spectrogram s = simulate_spectrogram(truth, cfg.probe, cfg.theta_grid());
  if (cfg.counts) s = add_poisson_noise(s, *cfg.counts, cfg.seed);
  write_json(out_path(c, cfg.output.truth), density_to_json(truth));
  if (c.format == "json") {
    const std::string p = out_path(c, fs::path(cfg.output.spectrogram).replace_extension(".json").string());
    write_json(p, spectrogram_to_json(s));
    std::cout << "wrote " << p << "\n";
  } else {
    const std::string p = out_path(c, cfg.output.spectrogram);
    write_text_file(p, spectrogram_to_csv(s));
    std::cout << "wrote " << p << "\n";
  }
}

void run_reconstruct(const Common& c) {
  const RunConfig cfg = load_config(c);
  Spectrogram s = spectrogram_from_csv(read_text_file(input_or(c, cfg.output.spectrogram)));
  s.probe = cfg.probe;
  const SidebandWindow window = cfg.window ? *cfg.window : prepared_density(cfg).window;
  const ReconstructionReport rep = squirrels_reconstruct(s, cfg.probe, window, cfg.reconstruction);
  write_json(out_path(c, cfg.output.density), density_to_json(rep.rho_hat));
  Json report = report_to_json(rep);
  write_json(out_path(c, cfg.output.report), report);
  std::printf("alpha %.6g  delta %.6g  snr %.4g  converged %s\n", rep.alpha_selected, rep.delta, rep.snr,
              rep.converged ? "yes" : "no");
  if (!rep.converged) std::fprintf(stderr, "warning: solver hit max_steps; best iterate reported\n");
  if (rep.selection.flat) std::fprintf(stderr, "warning: flat discrepancy curve, smallest alpha used\n");
}

void run_rabbitt(const Common& c) {
  const RunConfig cfg = load_config(c);
  Spectrogram s = spectrogram_from_csv(read_text_file(input_or(c, cfg.output.spectrogram)));
  s.probe = cfg.probe;
  const RabbittResult r = rabbitt_retrieve(s, cfg.probe);
  if (c.format == "json") {
    Json orders = Json::array();
    for (const auto& o : r.orders)
      orders.push_back({{"order", o.order}, {"phase_diff", o.phase_diff}, {"mean", o.mean}, {"amplitude", o.amplitude},
                        {"residual", o.residual}, {"reliable", o.reliable}});
    write_json(out_path(c, "rabbitt.json"), Json{{"orders", orders},
                                                 {"even_orders", r.even_orders},
                                                 {"cumulative_phases", r.cumulative_phases},
                                                 {"magnitudes", r.magnitudes}});
  } else {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < r.even_orders.size(); ++i)
      rows.push_back({std::to_string(r.even_orders[i]), format_double(r.magnitudes[i]), format_double(r.cumulative_phases[i])});
    write_text_file(out_path(c, "rabbitt_phases.csv"), table_csv({"sideband", "magnitude", "phase"}, rows));
    rows.clear();
    for (const auto& o : r.orders)
      rows.push_back({std::to_string(o.order), format_double(o.phase_diff), format_double(o.mean),
                      format_double(o.amplitude), format_double(o.residual), o.reliable ? "1" : "0"});
    write_text_file(out_path(c, "rabbitt_fits.csv"),
                    table_csv({"order", "phase_diff", "mean", "amplitude", "residual", "reliable"}, rows));
  }
  if (!r.all_reliable) std::fprintf(stderr, "warning: some orders have modulation contrast below 1e-3\n");
}

void run_wigner(const Common& c, int n_time) {
  const RunConfig cfg = load_config(c);
  const DensityMatrix rho = density_from_json(parse_json_text(read_text_file(input_or(c, cfg.output.density)), "density"));
  const WignerGrid w = wigner_from_density(rho, n_time, cfg.wavelength);
  if (c.format == "json") {
    Json values = Json::array();
    for (Eigen::Index i = 0; i < w.values.rows(); ++i) {
      Json row = Json::array();
      for (Eigen::Index j = 0; j < w.values.cols(); ++j) row.push_back(w.values(i, j));
      values.push_back(std::move(row));
    }
    write_json(out_path(c, "wigner.json"), Json{{"energies", w.energies}, {"times", w.times}, {"values", values}});
  } else {
    std::string out = "energy";
    for (double t : w.times) out += "," + format_double(t);
    out += "\n";
    for (std::size_t i = 0; i < w.energies.size(); ++i) {
      out += format_double(w.energies[i]);
      for (Eigen::Index j = 0; j < w.values.cols(); ++j) out += "," + format_double(w.values(static_cast<Eigen::Index>(i), j));
      out += "\n";
    }
    write_text_file(out_path(c, "wigner.csv"), out);
  }
}

void run_pulse_metrics(const Common& c) {
  const RunConfig cfg = load_config(c);
  const DensityMatrix rho =
      c.input.empty() ? prepared_density(cfg)
                      : density_from_json(parse_json_text(read_text_file(c.input), c.input));
  const PulseMetrics m = pulse_metrics(rho, cfg.pulse_samples, cfg.wavelength);
  const Json j{{"baseline_fraction", m.baseline_fraction}, {"rms_width_s", m.rms_width}, {"fwhm_s", m.fwhm},
               {"peak_time_s", m.peak_time}, {"multi_peak", m.multi_peak}};
  if (c.format == "json") {
    write_json(out_path(c, "pulse_metrics.json"), j);
  } else {
    write_text_file(out_path(c, "pulse_metrics.csv"),
                    table_csv({"baseline_fraction", "rms_width_s", "fwhm_s", "peak_time_s", "multi_peak"},
                              {{format_double(m.baseline_fraction), format_double(m.rms_width), format_double(m.fwhm),
                                format_double(m.peak_time), m.multi_peak ? "1" : "0"}}));
  }
  std::printf("baseline %.4f  rms %.1f as  fwhm %.1f as\n", m.baseline_fraction, m.rms_width * 1e18, m.fwhm * 1e18);
}

void run_fit_g(const Common& c, int harmonic, bool two_color) {
  detail::require(!c.input.empty(), "fit-g: --input is required");
  const std::string text = read_text_file(c.input);
  Json j;
  if (two_color) {
    const TwoColorFit f = fit_pure_two_color(spectrogram_from_csv(text));
    j = Json{{"g1", f.g1}, {"g2", f.g2}, {"theta_offset", f.theta_offset}, {"residual", f.residual}};
    std::printf("g1 %.6f  g2 %.6f  theta_offset %.6f\n", f.g1, f.g2, f.theta_offset);
  } else {
    const auto rows = detail::read_csv_rows(text);
    if (rows.size() < 2 || rows[0].size() != 2 || rows[0][0] != "sideband")
      throw ValidationError("fit-g: expected a 'sideband,population' csv");
    std::vector<double> p;
    int n_min = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].size() != 2) throw ValidationError("fit-g: line " + std::to_string(i + 1) + " needs two cells");
      const int n = static_cast<int>(parse_double(rows[i][0], "fit-g line " + std::to_string(i + 1)));
      if (i == 1) n_min = n;
      if (n != n_min + static_cast<int>(i) - 1) throw ValidationError("fit-g: sideband indices must be consecutive");
      p.push_back(parse_double(rows[i][1], "fit-g line " + std::to_string(i + 1)));
    }
    const SingleColorFit f = fit_g_single_color(p, n_min, harmonic);
    if (f.renormalized) std::fprintf(stderr, "warning: populations did not sum to one and were renormalized\n");
    j = Json{{"magnitude", f.magnitude}, {"residual", f.residual}, {"renormalized", f.renormalized}};
    std::printf("|g| %.6f\n", f.magnitude);
  }
  write_json(out_path(c, "fit_g.json"), j);
}

void run_extract(const Common& c, double photon_energy, bool background) {
  detail::require(!c.input.empty(), "extract-sidebands: --input is required");
  const auto rows = detail::read_csv_rows(read_text_file(c.input));
  if (rows.size() < 2 || rows[0].size() != 2) throw ValidationError("extract-sidebands: expected an 'energy,counts' csv");
  RawSpectrum raw;
  raw.photon_energy = photon_energy;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const std::string where = "extract-sidebands line " + std::to_string(i + 1);
    if (rows[i].size() != 2) throw ValidationError(where + ": needs two cells");
    raw.energy_axis.push_back(parse_double(rows[i][0], where));
    raw.counts.push_back(parse_double(rows[i][1], where));
  }
  ExtractOptions opt;
  opt.fit_background = background;
  const SidebandExtraction e = extract_sidebands(raw, opt);
  std::vector<std::vector<std::string>> out;
  for (std::size_t i = 0; i < e.populations.size(); ++i)
    out.push_back({std::to_string(e.n_min + static_cast<int>(i)), format_double(e.populations[i])});
  write_text_file(out_path(c, "sidebands.csv"), table_csv({"sideband", "population"}, out));
  write_json(out_path(c, "sideband_fit.json"),
             Json{{"width_ev", e.width}, {"eta", e.eta}, {"offset_ev", e.offset},
                  {"background", {{"amplitude", e.background_amplitude}, {"center_ev", e.background_center},
                                  {"sigma_left_ev", e.background_sigma_left}, {"sigma_right_ev", e.background_sigma_right}}},
                  {"residual", e.residual}});
  if (e.warning) std::fprintf(stderr, "warning: fit residual %.3g exceeds the warning threshold\n", e.residual);
}

void run_benchmark(const Common& c) {
  const RunConfig cfg = load_config(c);
  const BenchmarkTable t = benchmark_noise(cfg.benchmark);
  if (c.format == "json") {
    Json rows = Json::array();
    for (const auto& r : t.rows)
      rows.push_back({{"ratio", r.ratio}, {"mean_error", r.mean_error}, {"std_error", r.std_error},
                      {"mean_error_per_strength", r.mean_error_per_strength}});
    write_json(out_path(c, "benchmark.json"), Json{{"prep_strengths", cfg.benchmark.prep_strengths}, {"rows", rows}});
  } else {
    std::vector<std::string> header{"ratio", "mean_error", "std_error"};
    for (double g : cfg.benchmark.prep_strengths) header.push_back("error_g2_" + format_double(g));
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : t.rows) {
      std::vector<std::string> row{format_double(r.ratio), format_double(r.mean_error), format_double(r.std_error)};
      for (double e : r.mean_error_per_strength) row.push_back(format_double(e));
      rows.push_back(std::move(row));
    }
    write_text_file(out_path(c, "benchmark.csv"), table_csv(header, rows));
  }
  for (const auto& r : t.rows) std::printf("ratio %-5g mean %.5f std %.5f\n", r.ratio, r.mean_error, r.std_error);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Free-electron quantum state tomography from sideband spectrograms"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--config", common.config_path, "run configuration (JSON)")->check(CLI::ExistingFile);
  app.add_option("--seed", common.seed, "seed for every stochastic step");
  app.add_option("--out", common.out_dir, "output directory");
  app.add_option("--format", common.format, "tabular output format")->check(CLI::IsMember({"csv", "json"}));
  app.fallthrough();

  auto* simulate = app.add_subcommand("simulate", "prepare the configured state and write its spectrogram");
  auto* reconstruct = app.add_subcommand("reconstruct", "reconstruct a density matrix from a spectrogram csv");
  reconstruct->add_option("--input", common.input, "spectrogram csv (default <out>/spectrogram.csv)");
  auto* rabbitt = app.add_subcommand("rabbitt", "weak-probe sideband phase retrieval");
  rabbitt->add_option("--input", common.input, "spectrogram csv");
  int n_time = 256;
  auto* wigner = app.add_subcommand("wigner", "Wigner function of a density matrix");
  wigner->add_option("--input", common.input, "density-matrix json (default <out>/density.json)");
  wigner->add_option("--n-time", n_time, "time samples per optical period")->check(CLI::PositiveNumber);
  auto* pulse = app.add_subcommand("pulse-metrics", "attosecond pulse metrics of the temporal density");
  pulse->add_option("--input", common.input, "density-matrix json (default: the configured preparation)");
  int harmonic = 1;
  bool two_color = false;
  auto* fitg = app.add_subcommand("fit-g", "estimate coupling constants");
  fitg->add_option("--input", common.input, "'sideband,population' csv, or a spectrogram csv with --two-color");
  fitg->add_option("--harmonic", harmonic, "harmonic of the single-color spectrum")->check(CLI::IsMember({1, 2}));
  fitg->add_flag("--two-color", two_color, "fit |g1|, |g2| and the phase offset to a two-color spectrogram");
  double photon_energy = 1.55;
  bool no_background = false;
  auto* extract = app.add_subcommand("extract-sidebands", "sideband populations from a raw energy spectrum");
  extract->add_option("--input", common.input, "'energy,counts' csv (eV)");
  extract->add_option("--photon-energy", photon_energy, "photon energy in eV")->check(CLI::PositiveNumber);
  extract->add_flag("--no-background", no_background, "fit the comb without a plasmon background");
  auto* bench = app.add_subcommand("benchmark-noise", "reconstruction error versus probe/preparation ratio");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (simulate->parsed()) run_simulate(common);
    else if (reconstruct->parsed()) run_reconstruct(common);
    else if (rabbitt->parsed()) run_rabbitt(common);
    else if (wigner->parsed()) run_wigner(common, n_time);
    else if (pulse->parsed()) run_pulse_metrics(common);
    else if (fitg->parsed()) run_fit_g(common, harmonic, two_color);
    else if (extract->parsed()) run_extract(common, photon_energy, !no_background);
    else if (bench->parsed()) run_benchmark(common);
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
