#pragma once

// Weak-probe interferometric phase retrieval.  Under a probe with small |g|
// each odd sideband N collects amplitude from its even neighbours only:
//
//   c'_N ~ J_1(2|g|) (e^{i theta} c_{N-1} - e^{-i theta} c_{N+1}),
//   p_N(theta) = A + B cos(2 theta + c),   c = pi + phi_{N-1} - phi_{N+1}.

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "squirrels/error.hpp"
#include "squirrels/forward.hpp"

namespace squirrels {

/// Wraps an angle to (-pi, pi].
inline double wrap_phase(double a) {
  a = std::remainder(a, 2.0 * std::numbers::pi);
  if (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

struct RabbittOrder {
  int order = 0;             // odd sideband N
  double phase_diff = 0.0;   // phi_{N+1} - phi_{N-1}
  double mean = 0.0;         // A
  double amplitude = 0.0;    // B >= 0
  double residual = 0.0;     // rms of the fit residual relative to A
  bool reliable = true;      // B/A >= 1e-3
};

struct RabbittResult {
  std::vector<RabbittOrder> orders;     // ascending odd N
  std::vector<int> even_orders;         // ascending even N
  std::vector<double> cumulative_phases;  // phi_N on even_orders, phi_0 = 0
  std::vector<double> magnitudes;       // |c_N| on even_orders
  bool all_reliable = true;

  double phase_at(int n) const {
    for (std::size_t i = 0; i < even_orders.size(); ++i)
      if (even_orders[i] == n) return cumulative_phases[i];
    throw ValidationError("no retrieved phase for sideband " + std::to_string(n));
  }
};

/// Fits A + B cos(2 theta + c) to every odd sideband with both neighbours in
/// the spectrogram window and chains the neighbour phase differences outward
/// from phi_0 = 0.
inline RabbittResult rabbitt_retrieve(const Spectrogram& s, const Coupling& probe) {
  s.validate();
  probe.validate();
  detail::require(probe.harmonic == 1, "rabbitt_retrieve: probe must be the fundamental");
  detail::require(probe.magnitude < 0.5, "rabbitt_retrieve: probe too strong for the two-neighbour model (|g| >= 0.5)");
  detail::require(s.columns() >= 3, "rabbitt_retrieve: needs at least three phase columns");
  const SidebandWindow& w = s.window;
  detail::require(w.n_min <= -1 && w.n_max >= 1, "rabbitt_retrieve: window must hold sidebands -1 and 1");

  // Linear regression on (1, cos 2theta, sin 2theta).
  const Eigen::Index cols = s.populations.cols();
  RMatrix design(cols, 3);
  for (Eigen::Index j = 0; j < cols; ++j) {
    const double t = s.theta_grid[static_cast<std::size_t>(j)];
    design(j, 0) = 1.0;
    design(j, 1) = std::cos(2.0 * t);
    design(j, 2) = std::sin(2.0 * t);
  }
  const auto qr = design.colPivHouseholderQr();
  detail::require(qr.rank() == 3, "rabbitt_retrieve: phase grid does not resolve cos(2 theta)");

  RabbittResult out;
  for (int n = w.n_min + 1; n <= w.n_max - 1; ++n) {
    if (n % 2 == 0) continue;
    const RVector y = s.populations.row(w.offset(n)).transpose();
    const RVector coef = qr.solve(y);
    RabbittOrder o;
    o.order = n;
    o.mean = coef(0);
    o.amplitude = std::hypot(coef(1), coef(2));
    const double c = std::atan2(-coef(2), coef(1));
    o.phase_diff = wrap_phase(std::numbers::pi - c);
    o.residual = o.mean > 0.0 ? (design * coef - y).norm() / std::sqrt(static_cast<double>(cols)) / o.mean
                              : std::numeric_limits<double>::infinity();
    o.reliable = o.mean > 0.0 && o.amplitude / o.mean >= 1e-3;
    out.all_reliable = out.all_reliable && o.reliable;
    out.orders.push_back(o);
  }

  // Even magnitudes from the phase-averaged populations, renormalized over the
  // even lattice to undo first-order depletion by the probe.
  double even_total = 0.0;
  for (int n = w.n_min; n <= w.n_max; ++n)
    if (n % 2 == 0) even_total += s.populations.row(w.offset(n)).mean();
  detail::require(even_total > 0.0, "rabbitt_retrieve: even sidebands are empty");

  auto diff_at = [&](int odd) {
    for (const auto& o : out.orders)
      if (o.order == odd) return o.phase_diff;
    return 0.0;
  };
  // Every even N in the window is chained to 0 through fitted odd neighbours.
  for (int n = w.n_min + (w.n_min % 2 != 0 ? 1 : 0); n <= w.n_max; n += 2) {
    out.even_orders.push_back(n);
    out.magnitudes.push_back(std::sqrt(std::max(0.0, s.populations.row(w.offset(n)).mean() / even_total)));
  }
  out.cumulative_phases.assign(out.even_orders.size(), 0.0);
  std::size_t zero = 0;
  while (out.even_orders[zero] != 0) ++zero;
  for (std::size_t i = zero + 1; i < out.even_orders.size(); ++i) {
    const int n = out.even_orders[i];
    out.cumulative_phases[i] = out.cumulative_phases[i - 1] + diff_at(n - 1);
  }
  for (std::size_t i = zero; i-- > 0;) {
    const int n = out.even_orders[i];
    out.cumulative_phases[i] = out.cumulative_phases[i + 1] - diff_at(n + 1);
  }
  for (double& p : out.cumulative_phases) p = wrap_phase(p);
  return out;
}

}  // namespace squirrels
