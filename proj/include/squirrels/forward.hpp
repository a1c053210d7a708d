#pragma once

// State preparation and measurement simulation: single- and two-color phase
// modulation, free-space dispersion, phase-resolved sideband spectrograms,
// counting noise and phase-jitter ensembles.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "squirrels/error.hpp"
#include "squirrels/ladder.hpp"
#include "squirrels/parallel.hpp"

namespace squirrels {

namespace constants {
inline constexpr double hbar = 1.054571817e-34;          // J s
inline constexpr double speed_of_light = 299792458.0;    // m / s
inline constexpr double elementary_charge = 1.602176634e-19;  // C
inline constexpr double electron_rest_energy_ev = 510998.95;
}  // namespace constants

/// Sideband populations versus relative phase.  Column j holds the spectrum
/// recorded at theta_grid[j]; row r is sideband window.index_at(r).
struct Spectrogram {
  RMatrix populations;
  std::vector<double> theta_grid;
  Coupling probe;
  SidebandWindow window;
  std::optional<double> counts_per_spectrum;

  int rows() const { return static_cast<int>(populations.rows()); }
  int columns() const { return static_cast<int>(populations.cols()); }

  /// Populations stacked column by column (theta-major), the layout used by
  /// the forward operator.
  RVector stacked() const { return Eigen::Map<const RVector>(populations.data(), populations.size()); }

  void validate() const {
    window.validate();
    detail::require(!theta_grid.empty(), "spectrogram: empty theta grid");
    detail::require(populations.rows() == window.size(), "spectrogram: row count does not match window");
    detail::require(populations.cols() == static_cast<Eigen::Index>(theta_grid.size()),
                    "spectrogram: column count does not match theta grid");
    for (std::size_t i = 1; i < theta_grid.size(); ++i)
      detail::require(theta_grid[i] > theta_grid[i - 1], "spectrogram: theta grid must be strictly increasing");
    detail::require(populations.allFinite() && populations.minCoeff() >= 0.0,
                    "spectrogram: populations must be finite and non-negative");
  }
};

/// Equally spaced phases start + k (stop - start)/count, k = 0..count-1.
inline std::vector<double> uniform_theta_grid(int count, double start, double stop) {
  detail::require(count >= 1, "theta grid needs at least one point");
  detail::require(stop > start, "theta grid needs stop > start");
  std::vector<double> grid(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) grid[static_cast<std::size_t>(k)] = start + (stop - start) * k / count;
  return grid;
}

inline void validate_theta_grid(const std::vector<double>& grid) {
  detail::require(!grid.empty(), "theta grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    detail::require(std::isfinite(grid[i]), "theta grid contains a non-finite value");
    if (i > 0) detail::require(grid[i] > grid[i - 1], "theta grid must be strictly increasing");
  }
}

// ---------------------------------------------------------------------------
// Modulation

/// Applies the modulation unitary of `g` at delay `theta`.  The result lives
/// on the input window widened by padding_rungs(g), so no amplitude is lost;
/// it keeps the even lattice only when both input and coupling are even.
inline SidebandState modulate(const SidebandState& state, const Coupling& g, double theta) {
  g.validate();
  const int stride = (state.window.support_stride == 2 && g.harmonic == 2) ? 2 : 1;
  const SidebandWindow out = state.window.expanded(padding_rungs(g)).with_stride(stride);
  const CMatrix u = coupling_block(g, theta, out, state.window);
  return {out, u * state.amplitudes};
}

/// Two superimposed modulations (fundamental g1, second harmonic g2) acting on
/// the zero-loss state:
///   c_N = sum_m exp(i(N-2m)theta) J_{N-2m}(2|g1|) J_m(2|g2|)   (arg g = 0).
/// Throws if `window` would clip more than 1e-10 of the norm.
inline SidebandState two_color_amplitudes(const Coupling& g1, const Coupling& g2, double theta,
                                          const SidebandWindow& window) {
  detail::require(g1.harmonic == 1, "two_color_amplitudes: g1 must be the fundamental (harmonic 1)");
  detail::require(g2.harmonic == 2, "two_color_amplitudes: g2 must be the second harmonic (harmonic 2)");
  window.validate();
  SidebandState s = SidebandState::zero_loss(SidebandWindow{0, 0, 2});
  s = modulate(s, g2, 0.0);
  s = modulate(s, g1, theta);
  SidebandState out = s.cropped(window.with_stride(1));
  const double lost = 1.0 - out.amplitudes.squaredNorm();
  if (lost > 1e-10)
    throw ValidationError("two_color_amplitudes: window [" + std::to_string(window.n_min) + ", " +
                          std::to_string(window.n_max) + "] too small, clips " + std::to_string(lost) +
                          " of the norm");
  return out;
}

/// Pure state prepared from the zero-loss line by one interaction.
inline SidebandState prepare_pure(const Coupling& g, double theta = 0.0) {
  return modulate(SidebandState::zero_loss(SidebandWindow{0, 0, g.harmonic}), g, theta);
}

// ---------------------------------------------------------------------------
// Dispersion

struct DispersionGeometry {
  double distance = 0.0;        // m
  double wavelength = 800e-9;   // m, fundamental
  double kinetic_energy = 120e3;  // eV
  double rest_energy = constants::electron_rest_energy_ev;  // eV
};

/// Either an explicit quadratic phase coefficient or a drift geometry.
struct DispersionParams {
  std::optional<double> chi;
  std::optional<DispersionGeometry> geometry;
};

/// Quadratic spectral phase per N^2 accumulated over one metre of drift.
///
/// Second-order expansion of the electron wave number around the central
/// energy: d^2k/dE^2 = -1/(hbar m gamma^3 v^3), so sideband N (energy offset
/// N hbar omega) picks up -N^2 d hbar omega^2 / (2 m gamma^3 v^3).
inline double chi_per_meter(const DispersionGeometry& p) {
  detail::require(p.kinetic_energy > 0.0, "kinetic energy must be positive");
  detail::require(p.wavelength > 0.0, "wavelength must be positive");
  detail::require(p.rest_energy > 0.0, "rest energy must be positive");
  using namespace constants;
  const double gamma = 1.0 + p.kinetic_energy / p.rest_energy;
  const double beta = std::sqrt(1.0 - 1.0 / (gamma * gamma));
  const double v = beta * speed_of_light;
  const double mass = p.rest_energy * elementary_charge / (speed_of_light * speed_of_light);
  const double omega = 2.0 * std::numbers::pi * speed_of_light / p.wavelength;
  return hbar * omega * omega / (2.0 * mass * gamma * gamma * gamma * v * v * v);
}

inline double chi_from_geometry(const DispersionGeometry& p) {
  detail::require(std::isfinite(p.distance) && p.distance >= 0.0, "drift distance must be >= 0");
  return p.distance * chi_per_meter(p);
}

/// Drift distance that produces `chi` for the given beam (distance field ignored).
inline double distance_from_chi(double chi, const DispersionGeometry& p) { return chi / chi_per_meter(p); }

inline double resolve_chi(const DispersionParams& p) {
  if (p.chi) {
    detail::require(std::isfinite(*p.chi), "chi must be finite");
    return *p.chi;
  }
  if (p.geometry) return chi_from_geometry(*p.geometry);
  return 0.0;
}

/// rho_kl -> rho_kl exp(-i chi (k^2 - l^2)).
inline DensityMatrix apply_dispersion(const DensityMatrix& rho, double chi) {
  DensityMatrix out = rho;
  if (chi == 0.0) return out;
  const int n = rho.window.size();
  CVector phase(n);
  for (int i = 0; i < n; ++i) {
    const double k = rho.window.index_at(i);
    phase(i) = std::exp(Complex(0.0, -chi * k * k));
  }
  out.entries = phase.asDiagonal() * rho.entries * phase.conjugate().asDiagonal();
  return out;
}

inline SidebandState apply_dispersion(const SidebandState& state, double chi) {
  SidebandState out = state;
  for (int i = 0; i < state.window.size(); ++i) {
    const double k = state.window.index_at(i);
    out.amplitudes(i) *= std::exp(Complex(0.0, -chi * k * k));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Spectrograms

/// Detection window that captures the whole probed spectrum of states on `support`.
inline SidebandWindow detection_window(const SidebandWindow& support, const Coupling& probe) {
  return support.expanded(padding_rungs(probe)).with_stride(1);
}

/// Column j = diag(U(theta_j) rho U(theta_j)^dagger), read out on `detector`.
inline Spectrogram simulate_spectrogram(const DensityMatrix& rho, const Coupling& probe,
                                        const std::vector<double>& theta_grid, const SidebandWindow& detector) {
  probe.validate();
  detector.validate();
  validate_theta_grid(theta_grid);
  detail::require(rho.entries.rows() == rho.window.size(), "density matrix does not match its window");
  Spectrogram s{RMatrix(detector.size(), static_cast<Eigen::Index>(theta_grid.size())), theta_grid, probe,
                detector.with_stride(1), std::nullopt};
  parallel_for(theta_grid.size(), [&](std::size_t j) {
    const CMatrix u = coupling_block(probe, theta_grid[j], detector, rho.window);
    const CMatrix ur = u * rho.entries;
    s.populations.col(static_cast<Eigen::Index>(j)) = (ur.cwiseProduct(u.conjugate())).rowwise().sum().real();
  });
  return s;
}

inline Spectrogram simulate_spectrogram(const DensityMatrix& rho, const Coupling& probe,
                                        const std::vector<double>& theta_grid) {
  return simulate_spectrogram(rho, probe, theta_grid, detection_window(rho.window, probe));
}

namespace detail {

// Independent stream per (seed, column): results do not depend on how columns
// are scheduled.
inline std::mt19937_64 column_rng(std::uint64_t seed, std::size_t column) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(column), 0x5157u};
  return std::mt19937_64(seq);
}

}  // namespace detail

/// Scales every column to `counts_per_spectrum` expected counts, draws
/// independent Poisson counts per bin and renormalizes to unit sum.
inline Spectrogram add_poisson_noise(const Spectrogram& s, double counts_per_spectrum, std::uint64_t seed) {
  detail::require(std::isfinite(counts_per_spectrum) && counts_per_spectrum > 0.0,
                  "counts_per_spectrum must be positive");
  Spectrogram out = s;
  out.counts_per_spectrum = counts_per_spectrum;
  parallel_for(static_cast<std::size_t>(s.columns()), [&](std::size_t j) {
    auto rng = detail::column_rng(seed, j);
    const auto col = static_cast<Eigen::Index>(j);
    const double total = s.populations.col(col).sum();
    double drawn = 0.0;
    for (Eigen::Index r = 0; r < s.populations.rows(); ++r) {
      const double mean = total > 0.0 ? counts_per_spectrum * s.populations(r, col) / total : 0.0;
      double k = 0.0;
      if (mean > 0.0) k = static_cast<double>(std::poisson_distribution<long long>(mean)(rng));
      out.populations(r, col) = k;
      drawn += k;
    }
    if (drawn > 0.0) out.populations.col(col) /= drawn;
  });
  return out;
}

// ---------------------------------------------------------------------------
// Phase-jitter ensembles

/// Nodes and weights (summing to 1) of the n-point Gauss-Hermite rule for the
/// standard normal weight, via the Golub-Welsch eigenproblem.
inline std::pair<std::vector<double>, std::vector<double>> gauss_hermite_normal(int n) {
  detail::require(n >= 1, "quadrature needs at least one node");
  RMatrix jacobi = RMatrix::Zero(n, n);
  for (int k = 1; k < n; ++k) jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<RMatrix> eig(jacobi);
  std::vector<double> nodes(static_cast<std::size_t>(n)), weights(static_cast<std::size_t>(n));
  double total = 0.0;
  for (int k = 0; k < n; ++k) {
    nodes[static_cast<std::size_t>(k)] = eig.eigenvalues()(k);
    weights[static_cast<std::size_t>(k)] = eig.eigenvectors()(0, k) * eig.eigenvectors()(0, k);
    total += weights[static_cast<std::size_t>(k)];
  }
  for (auto& w : weights) w /= total;
  return {nodes, weights};
}

/// Incoherent average of pure states prepared by `g_prep` from the zero-loss
/// line with a Gaussian-distributed delay offset (std. dev. `sigma_phase`
/// radians of the fundamental), followed by dispersion `chi`.  `n_samples`
/// is the number of Gauss-Hermite nodes.
inline DensityMatrix phase_jitter_ensemble(const Coupling& g_prep, double chi, double sigma_phase,
                                           int n_samples = 21) {
  g_prep.validate();
  detail::require(std::isfinite(sigma_phase) && sigma_phase >= 0.0, "jitter sigma must be >= 0");
  detail::require(n_samples >= 1, "n_samples must be >= 1");
  if (sigma_phase == 0.0) n_samples = 1;
  const auto [nodes, weights] = gauss_hermite_normal(n_samples);
  DensityMatrix rho;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const SidebandState psi = apply_dispersion(prepare_pure(g_prep, sigma_phase * nodes[i]), chi);
    if (i == 0) rho = DensityMatrix::zero(psi.window);
    rho.entries += weights[i] * psi.amplitudes * psi.amplitudes.adjoint();
  }
  rho.entries = 0.5 * (rho.entries + rho.entries.adjoint()).eval();
  return rho;
}

}  // namespace squirrels
