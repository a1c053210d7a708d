#pragma once

// Phase-space and time-domain views of a sideband density matrix.
//
// Time is measured in seconds within one optical period T = lambda / c of the
// fundamental; omega = 2 pi / T.

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <numbers>
#include <vector>

#include "squirrels/error.hpp"
#include "squirrels/forward.hpp"
#include "squirrels/parallel.hpp"

namespace squirrels {

inline double optical_period(double wavelength = 800e-9) {
  detail::require(wavelength > 0.0, "wavelength must be positive");
  return wavelength / constants::speed_of_light;
}

/// `count` uniform samples of [0, T).
inline std::vector<double> period_samples(int count, double wavelength = 800e-9) {
  detail::require(count >= 1, "need at least one time sample");
  const double period = optical_period(wavelength);
  std::vector<double> t(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) t[static_cast<std::size_t>(i)] = period * i / count;
  return t;
}

namespace detail {

// s_d = sum over k - l = d of rho_kl, d = -(size-1) .. size-1.
inline std::vector<Complex> coherence_sums(const DensityMatrix& rho) {
  const int n = rho.window.size();
  std::vector<Complex> sums(static_cast<std::size_t>(2 * n - 1));
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l) sums[static_cast<std::size_t>(k - l + n - 1)] += rho.entries(k, l);
  return sums;
}

}  // namespace detail

/// n(t) = sum_{k,l} rho_kl exp(-i (k - l) omega t).
inline std::vector<double> temporal_density(const DensityMatrix& rho, const std::vector<double>& times,
                                            double wavelength = 800e-9) {
  const double omega = 2.0 * std::numbers::pi / optical_period(wavelength);
  const int n = rho.window.size();
  const auto sums = detail::coherence_sums(rho);
  std::vector<double> out(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    double v = sums[static_cast<std::size_t>(n - 1)].real();
    for (int d = 1; d < n; ++d) {
      // Hermiticity pairs d with -d: 2 Re(s_d e^{-i d omega t}).
      const Complex s = sums[static_cast<std::size_t>(d + n - 1)];
      const double a = d * omega * times[i];
      v += 2.0 * (s.real() * std::cos(a) + s.imag() * std::sin(a));
    }
    out[i] = v;
  }
  return out;
}

struct WignerGrid {
  std::vector<double> energies;  // half-integer sideband grid j
  std::vector<double> times;     // seconds in [0, T)
  RMatrix values;                // rows = energies, cols = times
};

/// Discrete Wigner function on the half-integer comb:
///   W(j, t) = sum_m rho_{j+m, j-m} exp(-2 i m omega t),
/// with m running over integers (integer j) or half-integers (half-integer j).
/// Summing over j gives n(t); averaging over t gives rho_jj (zero between
/// sidebands).
inline WignerGrid wigner_from_density(const DensityMatrix& rho, int n_time, double wavelength = 800e-9) {
  detail::require(n_time >= 1, "wigner_from_density: n_time must be >= 1");
  detail::require(rho.entries.rows() == rho.window.size(), "density matrix does not match its window");
  WignerGrid w;
  w.times = period_samples(n_time, wavelength);
  const double omega = 2.0 * std::numbers::pi / optical_period(wavelength);
  const int lo = 2 * rho.window.n_min, hi = 2 * rho.window.n_max;  // a = 2j = k + l
  for (int a = lo; a <= hi; ++a) w.energies.push_back(0.5 * a);
  w.values = RMatrix::Zero(static_cast<Eigen::Index>(w.energies.size()), n_time);
  parallel_for(w.energies.size(), [&](std::size_t row) {
    const int a = lo + static_cast<int>(row);
    for (int k = rho.window.n_min; k <= rho.window.n_max; ++k) {
      const int l = a - k;
      if (l < k || !rho.window.contains(l)) continue;  // pairs (k, l) and (l, k) folded together
      const Complex c = rho.entries(rho.window.offset(k), rho.window.offset(l));
      const int diff = k - l;  // = 2m, <= 0 here
      for (int j = 0; j < n_time; ++j) {
        const double ang = diff * omega * w.times[static_cast<std::size_t>(j)];
        const double term = c.real() * std::cos(ang) + c.imag() * std::sin(ang);
        w.values(static_cast<Eigen::Index>(row), j) += diff == 0 ? term : 2.0 * term;
      }
    }
  });
  return w;
}

struct PulseMetrics {
  double baseline_fraction = 0.0;  // min / max
  double rms_width = 0.0;          // seconds, circular, after baseline subtraction
  double fwhm = 0.0;               // seconds, around the global maximum
  double peak_time = 0.0;          // seconds
  bool multi_peak = false;         // another lobe exceeds half maximum
};

/// Pulse observables of a density sampled uniformly over one period.
inline PulseMetrics pulse_metrics(const std::vector<double>& density, double period) {
  detail::require(density.size() >= 8, "pulse_metrics: need at least 8 samples per period");
  detail::require(period > 0.0, "pulse_metrics: period must be positive");
  const auto n = static_cast<long>(density.size());
  const auto [min_it, max_it] = std::minmax_element(density.begin(), density.end());
  const double lo = *min_it, hi = *max_it;
  if (!(hi - lo >= 1e-12))
    throw NumericalError("pulse_metrics: density is flat (max - min < 1e-12), pulse metrics are undefined");
  const long peak = std::distance(density.begin(), max_it);
  const double dt = period / static_cast<double>(n);

  PulseMetrics m;
  m.baseline_fraction = hi > 0.0 ? std::max(0.0, lo) / hi : 0.0;
  m.peak_time = peak * dt;

  // Circular spread: R = |<e^{i phi}>| under the baseline-subtracted weight.
  double total = 0.0, c = 0.0, s = 0.0;
  for (long i = 0; i < n; ++i) {
    const double w = density[static_cast<std::size_t>(i)] - lo;
    const double phi = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
    total += w;
    c += w * std::cos(phi);
    s += w * std::sin(phi);
  }
  const double r = std::min(1.0, std::hypot(c, s) / total);
  m.rms_width = r > 0.0 ? std::sqrt(-2.0 * std::log(r)) * period / (2.0 * std::numbers::pi)
                        : std::numeric_limits<double>::infinity();

  // Half-maximum crossings walking outward from the peak.
  const double half = lo + 0.5 * (hi - lo);
  auto at = [&](long i) { return density[static_cast<std::size_t>(((i % n) + n) % n)]; };
  long right = peak, left = peak;
  while (right - peak < n && at(right + 1) >= half) ++right;
  while (peak - left < n && at(left - 1) >= half) --left;
  const double fr = (at(right) - half) / (at(right) - at(right + 1));
  const double fl = (at(left) - half) / (at(left) - at(left - 1));
  m.fwhm = std::min(period, (static_cast<double>(right - left) + fr + fl) * dt);

  for (long i = right + 1; i < left - 1 + n; ++i)
    if (at(i) >= half) {
      m.multi_peak = true;
      break;
    }
  return m;
}

inline PulseMetrics pulse_metrics(const DensityMatrix& rho, int samples = 4096, double wavelength = 800e-9) {
  return pulse_metrics(temporal_density(rho, period_samples(samples, wavelength), wavelength),
                       optical_period(wavelength));
}

struct StateDistance {
  double frobenius = 0.0;
  double fidelity = 0.0;
  double purity_a = 0.0;
  double purity_b = 0.0;
};

namespace detail {

inline CMatrix embedded(const DensityMatrix& rho, const SidebandWindow& target) {
  return rho.cropped(target).entries;
}

inline CMatrix psd_sqrt(const CMatrix& a) {
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(0.5 * (a + a.adjoint()));
  // Rounding noise on null eigenvalues would otherwise turn into sqrt(eps).
  const double floor = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
  const RVector root = eig.eigenvalues().unaryExpr([floor](double v) { return v > floor ? std::sqrt(v) : 0.0; });
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().adjoint();
}

}  // namespace detail

/// Frobenius distance, Uhlmann fidelity (tr sqrt(sqrt(a) b sqrt(a)))^2 and
/// purities.  The mixed case uses the trace norm of sqrt(a) sqrt(b), which is
/// symmetric in a and b.  Both matrices are compared on the union of their windows.
inline StateDistance state_distance(const DensityMatrix& a, const DensityMatrix& b) {
  const SidebandWindow u{std::min(a.window.n_min, b.window.n_min), std::max(a.window.n_max, b.window.n_max), 1};
  const CMatrix ma = detail::embedded(a, u), mb = detail::embedded(b, u);
  StateDistance d;
  d.frobenius = (ma - mb).norm();
  d.purity_a = (ma * ma).trace().real();
  d.purity_b = (mb * mb).trace().real();
  if (std::abs(d.purity_a - 1.0) < 1e-10 || std::abs(d.purity_b - 1.0) < 1e-10) {
    // Rank one: F = <psi|rho|psi> = tr(a b).
    d.fidelity = (ma * mb).trace().real();
  } else {
    const CMatrix prod = detail::psd_sqrt(ma) * detail::psd_sqrt(mb);
    const double t = Eigen::JacobiSVD<CMatrix>(prod).singularValues().sum();
    d.fidelity = t * t;
  }
  d.fidelity = std::clamp(d.fidelity, 0.0, 1.0);
  return d;
}

}  // namespace squirrels
