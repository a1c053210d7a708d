#pragma once

// Run configuration for the command-line pipeline.  Every object rejects keys
// it does not know, naming the full key path ("$.reconstruction.tau").
//
// {
//   "experiment": "two-color" | "two-plane",
//   "prep":   {"magnitude": 0.63, "phase": 0, "harmonic": 2},
//   "probe":  {"magnitude": 2.16, "phase": 0, "harmonic": 1},
//   "theta":  {"count": 24, "start": 0, "stop": 3.14159...},
//   "window": {"n_min": -8, "n_max": 8, "support_stride": 2},
//   "dispersion": {"chi": 0.05} | {"distance": 1.5e-3, "wavelength": 8e-7, "kinetic_energy": 1.2e5},
//   "jitter": {"sigma": 0.189, "samples": 21},
//   "noise":  {"counts": 1e4},
//   "reconstruction": {"alpha_iterations": 3, "tau": 1.01, "tolerance": 1e-9, "kkt_tolerance": 1e-7,
//                      "max_steps": 20000,
//                      "bisection_width": 0.05,
//                      "alpha_grid": {"lower": 1e-8, "upper": 1e2, "points": 40}},
//   "benchmark": {"ratios": [...], "prep_strengths": [...], "counts": 1e4, "seeds": 4,
//                 "theta_count": 24, "support_threshold": 1e-8},
//   "pulse": {"samples": 4096, "wavelength": 8e-7},
//   "seed": 1,
//   "output": {"spectrogram": "spectrogram.csv", "truth": "truth.json", "density": "density.json",
//              "report": "report.json"}
// }

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <optional>
#include <string>

#include "squirrels/benchmark.hpp"
#include "squirrels/forward.hpp"
#include "squirrels/io.hpp"
#include "squirrels/reconstruction.hpp"

namespace squirrels {

enum class ExperimentKind { two_color, two_plane };

struct ThetaSpec {
  int count = 24;
  std::optional<double> start;
  std::optional<double> stop;
};

struct OutputPaths {
  std::string spectrogram = "spectrogram.csv";
  std::string truth = "truth.json";
  std::string density = "density.json";
  std::string report = "report.json";
};

struct RunConfig {
  ExperimentKind experiment = ExperimentKind::two_color;
  Coupling prep{0.63, 0.0, 2};
  Coupling probe{2.16, 0.0, 1};
  ThetaSpec theta;
  std::optional<SidebandWindow> window;  // trimmed from the prepared state when absent
  DispersionParams dispersion;
  double jitter_sigma = 0.0;
  int jitter_samples = 21;
  std::optional<double> counts;
  ReconstructionConfig reconstruction;
  BenchmarkConfig benchmark;
  int pulse_samples = 4096;
  double wavelength = 800e-9;
  std::uint64_t seed = 1;
  OutputPaths output;

  /// Phase grid: [0, pi) for even-support preparations, [0, 2 pi) otherwise,
  /// unless overridden.
  std::vector<double> theta_grid() const {
    const double period = experiment == ExperimentKind::two_color ? std::numbers::pi : 2.0 * std::numbers::pi;
    return uniform_theta_grid(theta.count, theta.start.value_or(0.0), theta.stop.value_or(period));
  }

  int support_stride() const { return experiment == ExperimentKind::two_color ? 2 : 1; }
};

namespace detail {

inline void reject_unknown(const Json& j, const std::string& path, std::initializer_list<const char*> known) {
  if (!j.is_object()) throw ValidationError(path + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ValidationError(path + "." + key + ": unknown key");
  }
}

inline double real_at(const Json& j, const std::string& path) {
  if (!j.is_number()) throw ValidationError(path + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ValidationError(path + ": must be finite");
  return v;
}

inline Coupling coupling_from_json(const Json& j, const std::string& path, int default_harmonic) {
  reject_unknown(j, path, {"magnitude", "phase", "harmonic"});
  Coupling g;
  g.magnitude = real_at(member(j, "magnitude", path), path + ".magnitude");
  g.phase = j.contains("phase") ? real_at(j.at("phase"), path + ".phase") : 0.0;
  g.harmonic = j.contains("harmonic") ? integer_at(j.at("harmonic"), path + ".harmonic") : default_harmonic;
  try {
    g.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
  return g;
}

inline std::vector<double> real_list(const Json& j, const std::string& path) {
  if (!j.is_array()) throw ValidationError(path + ": expected an array");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(real_at(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

}  // namespace detail

inline RunConfig run_config_from_json(const Json& j) {
  using namespace detail;
  reject_unknown(j, "$", {"experiment", "prep", "probe", "theta", "window", "dispersion", "jitter", "noise",
                          "reconstruction", "benchmark", "pulse", "seed", "output"});
  RunConfig c;
  if (j.contains("experiment")) {
    const Json& e = j.at("experiment");
    const std::string kind = e.is_string() ? e.get<std::string>() : "";
    if (kind == "two-color") {
      c.experiment = ExperimentKind::two_color;
    } else if (kind == "two-plane") {
      c.experiment = ExperimentKind::two_plane;
      c.prep = Coupling{1.97, 0.0, 1};
      c.probe = Coupling{1.97, 0.0, 1};
    } else {
      throw ValidationError("$.experiment: expected \"two-color\" or \"two-plane\"");
    }
  }
  if (j.contains("prep")) c.prep = coupling_from_json(j.at("prep"), "$.prep", c.support_stride());
  if (j.contains("probe")) c.probe = coupling_from_json(j.at("probe"), "$.probe", 1);
  if (c.experiment == ExperimentKind::two_color && c.prep.harmonic != 2)
    throw ValidationError("$.prep.harmonic: two-color preparation uses harmonic 2");
  if (c.experiment == ExperimentKind::two_plane && c.prep.harmonic != 1)
    throw ValidationError("$.prep.harmonic: two-plane preparation uses harmonic 1");
  if (c.probe.harmonic != 1) throw ValidationError("$.probe.harmonic: the probe is the fundamental (harmonic 1)");

  if (j.contains("theta")) {
    const Json& t = j.at("theta");
    reject_unknown(t, "$.theta", {"count", "start", "stop"});
    if (t.contains("count")) c.theta.count = integer_at(t.at("count"), "$.theta.count");
    if (t.contains("start")) c.theta.start = real_at(t.at("start"), "$.theta.start");
    if (t.contains("stop")) c.theta.stop = real_at(t.at("stop"), "$.theta.stop");
    if (c.theta.count < 1) throw ValidationError("$.theta.count: must be >= 1");
  }
  if (j.contains("window")) {
    c.window = window_from_json(j.at("window"), "$.window");
    if (c.window->support_stride != c.support_stride())
      throw ValidationError("$.window.support_stride: must be " + std::to_string(c.support_stride()) +
                            " for this experiment");
  }
  if (j.contains("dispersion")) {
    const Json& d = j.at("dispersion");
    reject_unknown(d, "$.dispersion", {"chi", "distance", "wavelength", "kinetic_energy", "rest_energy"});
    if (d.contains("chi")) {
      if (d.size() != 1) throw ValidationError("$.dispersion: give either chi or a geometry, not both");
      c.dispersion.chi = real_at(d.at("chi"), "$.dispersion.chi");
    } else {
      DispersionGeometry g;
      g.distance = real_at(member(d, "distance", "$.dispersion"), "$.dispersion.distance");
      if (d.contains("wavelength")) g.wavelength = real_at(d.at("wavelength"), "$.dispersion.wavelength");
      if (d.contains("kinetic_energy")) g.kinetic_energy = real_at(d.at("kinetic_energy"), "$.dispersion.kinetic_energy");
      if (d.contains("rest_energy")) g.rest_energy = real_at(d.at("rest_energy"), "$.dispersion.rest_energy");
      if (g.distance < 0.0) throw ValidationError("$.dispersion.distance: must be >= 0");
      if (g.kinetic_energy <= 0.0) throw ValidationError("$.dispersion.kinetic_energy: must be positive");
      c.dispersion.geometry = g;
    }
  }
  if (j.contains("jitter")) {
    const Json& t = j.at("jitter");
    reject_unknown(t, "$.jitter", {"sigma", "samples"});
    if (t.contains("sigma")) c.jitter_sigma = real_at(t.at("sigma"), "$.jitter.sigma");
    if (t.contains("samples")) c.jitter_samples = integer_at(t.at("samples"), "$.jitter.samples");
    if (c.jitter_sigma < 0.0) throw ValidationError("$.jitter.sigma: must be >= 0");
    if (c.jitter_samples < 1) throw ValidationError("$.jitter.samples: must be >= 1");
  }
  if (j.contains("noise")) {
    const Json& n = j.at("noise");
    reject_unknown(n, "$.noise", {"counts"});
    if (n.contains("counts")) {
      c.counts = real_at(n.at("counts"), "$.noise.counts");
      if (*c.counts <= 0.0) throw ValidationError("$.noise.counts: must be positive");
    }
  }
  auto read_reconstruction = [](const Json& r, const std::string& path, ReconstructionConfig& rc) {
    reject_unknown(r, path, {"alpha_iterations", "tau", "tolerance", "kkt_tolerance", "max_steps", "bisection_width", "alpha_grid"});
    if (r.contains("alpha_iterations")) rc.alpha_iterations = integer_at(r.at("alpha_iterations"), path + ".alpha_iterations");
    if (r.contains("tau")) rc.tau = real_at(r.at("tau"), path + ".tau");
    if (r.contains("tolerance")) rc.solver.tolerance = real_at(r.at("tolerance"), path + ".tolerance");
    if (r.contains("kkt_tolerance")) rc.solver.kkt_tolerance = real_at(r.at("kkt_tolerance"), path + ".kkt_tolerance");
    if (r.contains("max_steps")) rc.solver.max_steps = integer_at(r.at("max_steps"), path + ".max_steps");
    if (r.contains("bisection_width")) rc.bisection_width = real_at(r.at("bisection_width"), path + ".bisection_width");
    if (r.contains("alpha_grid")) {
      const Json& g = r.at("alpha_grid");
      const std::string gp = path + ".alpha_grid";
      reject_unknown(g, gp, {"lower", "upper", "points"});
      if (g.contains("lower")) rc.alpha_grid.lower = real_at(g.at("lower"), gp + ".lower");
      if (g.contains("upper")) rc.alpha_grid.upper = real_at(g.at("upper"), gp + ".upper");
      if (g.contains("points")) rc.alpha_grid.points = integer_at(g.at("points"), gp + ".points");
    }
    try {
      rc.validate();
    } catch (const ValidationError& e) {
      throw ValidationError(path + ": " + e.what());
    }
  };
  if (j.contains("reconstruction")) read_reconstruction(j.at("reconstruction"), "$.reconstruction", c.reconstruction);
  c.benchmark.reconstruction = c.reconstruction;
  if (j.contains("benchmark")) {
    const Json& b = j.at("benchmark");
    reject_unknown(b, "$.benchmark", {"ratios", "prep_strengths", "counts", "seeds", "theta_count", "support_threshold"});
    if (b.contains("ratios")) c.benchmark.ratios = real_list(b.at("ratios"), "$.benchmark.ratios");
    if (b.contains("prep_strengths")) c.benchmark.prep_strengths = real_list(b.at("prep_strengths"), "$.benchmark.prep_strengths");
    if (b.contains("counts")) {
      if (b.at("counts").is_null()) c.benchmark.counts.reset();
      else c.benchmark.counts = real_at(b.at("counts"), "$.benchmark.counts");
    }
    if (b.contains("seeds")) c.benchmark.seeds = integer_at(b.at("seeds"), "$.benchmark.seeds");
    if (b.contains("theta_count")) c.benchmark.theta_count = integer_at(b.at("theta_count"), "$.benchmark.theta_count");
    if (b.contains("support_threshold"))
      c.benchmark.support_threshold = real_at(b.at("support_threshold"), "$.benchmark.support_threshold");
    try {
      c.benchmark.validate();
    } catch (const ValidationError& e) {
      throw ValidationError(std::string("$.benchmark: ") + e.what());
    }
  }
  if (j.contains("pulse")) {
    const Json& p = j.at("pulse");
    reject_unknown(p, "$.pulse", {"samples", "wavelength"});
    if (p.contains("samples")) c.pulse_samples = integer_at(p.at("samples"), "$.pulse.samples");
    if (p.contains("wavelength")) c.wavelength = real_at(p.at("wavelength"), "$.pulse.wavelength");
    if (c.pulse_samples < 8) throw ValidationError("$.pulse.samples: must be >= 8");
    if (c.wavelength <= 0.0) throw ValidationError("$.pulse.wavelength: must be positive");
  }
  if (j.contains("seed")) {
    const Json& s = j.at("seed");
    if (!s.is_number_unsigned()) throw ValidationError("$.seed: expected a non-negative integer");
    c.seed = s.get<std::uint64_t>();
  }
  c.benchmark.seed = c.seed;
  if (j.contains("output")) {
    const Json& o = j.at("output");
    reject_unknown(o, "$.output", {"spectrogram", "truth", "density", "report"});
    auto str = [&](const char* key, std::string& dst) {
      if (!o.contains(key)) return;
      if (!o.at(key).is_string()) throw ValidationError(std::string("$.output.") + key + ": expected a string");
      dst = o.at(key).get<std::string>();
    };
    str("spectrogram", c.output.spectrogram);
    str("truth", c.output.truth);
    str("density", c.output.density);
    str("report", c.output.report);
  }
  return c;
}

/// Ground-truth state of a run: the preparation (jitter-averaged, dispersed),
/// cropped to the configured window or to the sidebands holding more than
/// `threshold` population, and renormalized.
inline DensityMatrix prepared_density(const RunConfig& c, double threshold = 1e-8) {
  const double chi = (c.dispersion.chi || c.dispersion.geometry) ? resolve_chi(c.dispersion) : 0.0;
  const DensityMatrix full = phase_jitter_ensemble(c.prep, chi, c.jitter_sigma, c.jitter_samples);
  SidebandWindow w;
  if (c.window) {
    w = *c.window;
  } else {
    int half = 0;
    for (int n = full.window.n_min; n <= full.window.n_max; ++n)
      if (full.at(n, n).real() > threshold) half = std::max(half, std::abs(n));
    half += half % c.support_stride();
    w = SidebandWindow::symmetric(half, c.support_stride());
  }
  DensityMatrix rho = full.cropped(w);
  const double tr = rho.trace();
  if (!(tr > 0.5)) throw ValidationError("$.window: holds only " + std::to_string(tr) + " of the prepared population");
  rho.entries /= tr;
  return rho;
}

}  // namespace squirrels
