#pragma once

// Coupling-constant estimation from measured spectra.

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "squirrels/bessel.hpp"
#include "squirrels/error.hpp"
#include "squirrels/forward.hpp"

namespace squirrels {

namespace detail {

/// Golden-section minimization of a unimodal f on [a, b].
template <class F>
double golden_section(F&& f, double a, double b, double tol = 1e-10) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace detail

struct SingleColorFit {
  double magnitude = 0.0;
  double residual = 0.0;     // sum of squared population differences
  bool renormalized = false;  // input did not sum to one
};

/// Least-squares |g| from a single-color spectrum: minimizes
/// sum_N (p_N - J_{N/h}(2|g|)^2)^2 with a dense scan followed by golden-section
/// refinement of every local minimum.  Residuals that tie within 1e-6 resolve
/// to the smaller |g|.  `populations[i]` is sideband n_min + i.
inline SingleColorFit fit_g_single_color(std::span<const double> populations, int n_min, int harmonic = 1) {
  detail::require(!populations.empty(), "fit_g_single_color: empty spectrum");
  detail::require(harmonic == 1 || harmonic == 2, "harmonic must be 1 or 2");
  double total = 0.0;
  for (double p : populations) {
    detail::require(std::isfinite(p) && p >= 0.0, "fit_g_single_color: populations must be non-negative");
    total += p;
  }
  detail::require(total > 0.0, "fit_g_single_color: spectrum has no counts");
  SingleColorFit fit;
  fit.renormalized = std::abs(total - 1.0) > 1e-9;
  std::vector<double> p(populations.begin(), populations.end());
  for (double& v : p) v /= total;

  const int n_max = n_min + static_cast<int>(p.size()) - 1;
  const int extent = std::max(std::abs(n_min), std::abs(n_max));
  const double g_max = 0.5 * extent / harmonic + 2.0;

  // Sidebands outside the recorded window count as measured zeros.
  auto residual = [&](double g) {
    const double x = 2.0 * g;
    const int reach = std::max(extent, harmonic * (bessel_reach(x, 1e-12) + 1));
    double r = 0.0;
    for (int n = -reach; n <= reach; ++n) {
      const double measured = (n >= n_min && n <= n_max) ? p[static_cast<std::size_t>(n - n_min)] : 0.0;
      double model = 0.0;
      if (n % harmonic == 0) {
        const double j = bessel_j(n / harmonic, x);
        model = j * j;
      }
      r += (measured - model) * (measured - model);
    }
    return r;
  };

  const double step = 0.005;
  const int count = static_cast<int>(std::ceil(g_max / step)) + 1;
  std::vector<double> scan(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) scan[static_cast<std::size_t>(i)] = residual(i * step);

  fit.magnitude = 0.0;
  fit.residual = std::numeric_limits<double>::infinity();
  for (int i = 0; i < count; ++i) {
    const double here = scan[static_cast<std::size_t>(i)];
    const bool left_ok = i == 0 || here <= scan[static_cast<std::size_t>(i - 1)];
    const bool right_ok = i + 1 == count || here <= scan[static_cast<std::size_t>(i + 1)];
    if (!left_ok || !right_ok) continue;
    const double a = std::max(0.0, (i - 1) * step), b = std::min(g_max + step, (i + 1) * step);
    const double g = detail::golden_section(residual, a, b, 1e-10);
    const double r = residual(g);
    const bool tie = std::abs(r - fit.residual) <= 1e-6;
    if ((!tie && r < fit.residual) || (tie && g < fit.magnitude)) {
      fit.magnitude = g;
      fit.residual = r;
    }
  }
  return fit;
}

struct TwoColorFit {
  double g1 = 0.0;
  double g2 = 0.0;
  double theta_offset = 0.0;  // model phase = data phase + theta_offset
  double residual = 0.0;      // sum of squared population differences
  std::vector<double> residual_history;  // accepted descent steps of the winning start
};

/// Populations of the pure two-color state at every phase of `grid` shifted by `offset`.
inline RMatrix two_color_spectrogram(double g1, double g2, double offset, const std::vector<double>& grid,
                                     const SidebandWindow& window) {
  const SidebandState prepared = prepare_pure(Coupling{g2, 0.0, 2});
  const Coupling probe{g1, 0.0, 1};
  const SidebandWindow full = prepared.window.expanded(padding_rungs(probe)).with_stride(1);
  const int span = full.n_max - prepared.window.n_min;
  const std::vector<double> bessel = bessel_table(span, 2.0 * g1);
  auto jn = [&](int k) {
    const double v = bessel[static_cast<std::size_t>(std::abs(k))];
    return (k < 0 && (k & 1)) ? -v : v;
  };
  // Occupied input indices only (even lattice).
  std::vector<int> occupied;
  for (int n = prepared.window.n_min; n <= prepared.window.n_max; ++n)
    if (std::norm(prepared.at(n)) > 0.0) occupied.push_back(n);

  RMatrix out = RMatrix::Zero(window.size(), static_cast<Eigen::Index>(grid.size()));
  std::vector<Complex> shifted(occupied.size());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const double theta = grid[j] + offset;
    for (std::size_t k = 0; k < occupied.size(); ++k)
      shifted[k] = prepared.at(occupied[k]) * std::exp(Complex(0.0, -occupied[k] * theta));
    for (int n = std::max(window.n_min, full.n_min); n <= std::min(window.n_max, full.n_max); ++n) {
      Complex c{};
      for (std::size_t k = 0; k < occupied.size(); ++k) c += jn(n - occupied[k]) * shifted[k];
      out(window.offset(n), static_cast<Eigen::Index>(j)) = std::norm(c);
    }
  }
  return out;
}

/// Least-squares fit of (|g1|, |g2|, theta offset) of the pure two-color model
/// to a spectrogram.  Eight starts spread the second moment of the
/// phase-averaged spectrum (2 g1^2 + 8 g2^2) over the two couplings at two
/// offsets; each start runs an adaptive-step coordinate descent.
inline TwoColorFit fit_pure_two_color(const Spectrogram& s) {
  s.validate();
  detail::require(s.columns() >= 2, "fit_pure_two_color: needs at least two phase columns");
  RMatrix data = s.populations;
  for (Eigen::Index j = 0; j < data.cols(); ++j) {
    const double col = data.col(j).sum();
    if (col > 0.0) data.col(j) /= col;
  }

  double variance = 0.0;
  {
    const RVector mean = data.rowwise().mean();
    double first = 0.0;
    for (int i = 0; i < s.window.size(); ++i) first += s.window.index_at(i) * mean(i);
    for (int i = 0; i < s.window.size(); ++i) {
      const double d = s.window.index_at(i) - first;
      variance += d * d * mean(i);
    }
  }

  auto residual = [&](const std::array<double, 3>& q) {
    if (q[0] < 0.0 || q[1] < 0.0) return std::numeric_limits<double>::infinity();
    return (two_color_spectrogram(q[0], q[1], q[2], s.theta_grid, s.window) - data).squaredNorm();
  };

  TwoColorFit best;
  best.residual = std::numeric_limits<double>::infinity();
  for (double share : {0.2, 0.5, 0.8, 0.95}) {
    for (double offset : {0.0, 0.5 * std::numbers::pi}) {
      std::array<double, 3> q{std::sqrt(share * variance / 2.0), std::sqrt((1.0 - share) * variance / 8.0), offset};
      std::array<double, 3> step{0.1, 0.1, 0.2};
      double r = residual(q);
      std::vector<double> history{r};
      for (int sweep = 0; sweep < 4000; ++sweep) {
        bool moved = false;
        for (std::size_t c = 0; c < 3; ++c) {
          for (double dir : {1.0, -1.0}) {
            auto trial = q;
            trial[c] += dir * step[c];
            if (c < 2) trial[c] = std::max(trial[c], 0.0);
            const double rt = residual(trial);
            if (rt < r) {
              q = trial;
              r = rt;
              history.push_back(r);
              step[c] *= 2.0;
              moved = true;
              break;
            }
          }
          if (!moved) step[c] *= 0.5;
        }
        if (std::max({step[0], step[1], step[2]}) < 1e-9) break;
      }
      if (r < best.residual) {
        best = TwoColorFit{q[0], q[1], q[2], r, std::move(history)};
      }
    }
  }
  // Reduce the offset to one period of the spectrogram (pi for even preparations).
  best.theta_offset = std::remainder(best.theta_offset, std::numbers::pi);
  if (best.theta_offset < 0.0) best.theta_offset += std::numbers::pi;
  return best;
}

}  // namespace squirrels
