#pragma once

// Sideband populations from a raw energy-loss spectrum: a comb of
// pseudo-Voigt peaks spaced by the photon energy, all sharing one width and
// mixing, on top of an asymmetric Gaussian (plasmon) background.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "squirrels/error.hpp"
#include "squirrels/ladder.hpp"

namespace squirrels {

struct RawSpectrum {
  std::vector<double> energy_axis;  // eV relative to the zero-loss line
  std::vector<double> counts;
  double photon_energy = 1.55;  // eV

  void validate() const {
    detail::require(!energy_axis.empty(), "raw spectrum is empty");
    detail::require(energy_axis.size() == counts.size(), "energy axis and counts differ in length");
    detail::require(photon_energy > 0.0, "photon energy must be positive");
    for (std::size_t i = 0; i < counts.size(); ++i) {
      detail::require(std::isfinite(counts[i]) && counts[i] >= 0.0, "counts must be non-negative");
      if (i > 0) detail::require(energy_axis[i] > energy_axis[i - 1], "energy axis must be strictly increasing");
    }
  }
};

/// Area-normalized pseudo-Voigt with full width `w` and Lorentzian share `eta`.
inline double pseudo_voigt(double x, double w, double eta) {
  const double hw = 0.5 * w;
  const double lorentz = hw / (std::numbers::pi * (x * x + hw * hw));
  const double gauss = std::sqrt(4.0 * std::log(2.0) / std::numbers::pi) / w * std::exp(-4.0 * std::log(2.0) * x * x / (w * w));
  return eta * lorentz + (1.0 - eta) * gauss;
}

inline double asymmetric_gaussian(double x, double center, double sigma_left, double sigma_right) {
  const double d = x - center;
  const double s = d < 0.0 ? sigma_left : sigma_right;
  return std::exp(-0.5 * d * d / (s * s));
}

/// Lawson-Hanson non-negative least squares given the normal equations
/// (gram = A^T A, rhs = A^T b).
inline RVector nnls_normal(const RMatrix& gram, const RVector& rhs, int max_iterations = 500) {
  const Eigen::Index n = rhs.size();
  RVector x = RVector::Zero(n);
  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  const double tol = 1e-12 * std::max(1.0, gram.diagonal().cwiseAbs().maxCoeff());

  auto solve_passive = [&]() {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < n; ++i)
      if (passive[static_cast<std::size_t>(i)]) idx.push_back(i);
    RMatrix g(idx.size(), idx.size());
    RVector r(idx.size());
    for (std::size_t a = 0; a < idx.size(); ++a) {
      r(static_cast<Eigen::Index>(a)) = rhs(idx[a]);
      for (std::size_t b = 0; b < idx.size(); ++b)
        g(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = gram(idx[a], idx[b]);
    }
    const RVector sol = g.ldlt().solve(r);
    RVector z = RVector::Zero(n);
    for (std::size_t a = 0; a < idx.size(); ++a) z(idx[a]) = sol(static_cast<Eigen::Index>(a));
    return z;
  };

  for (int it = 0; it < max_iterations; ++it) {
    const RVector w = rhs - gram * x;
    Eigen::Index best = -1;
    double best_w = tol;
    for (Eigen::Index i = 0; i < n; ++i)
      if (!passive[static_cast<std::size_t>(i)] && w(i) > best_w) {
        best_w = w(i);
        best = i;
      }
    if (best < 0) break;
    passive[static_cast<std::size_t>(best)] = true;
    for (int inner = 0; inner < max_iterations; ++inner) {
      const RVector z = solve_passive();
      bool feasible = true;
      for (Eigen::Index i = 0; i < n; ++i)
        if (passive[static_cast<std::size_t>(i)] && z(i) <= 0.0) feasible = false;
      if (feasible) {
        x = z;
        break;
      }
      double step = 1.0;
      for (Eigen::Index i = 0; i < n; ++i)
        if (passive[static_cast<std::size_t>(i)] && z(i) <= 0.0) step = std::min(step, x(i) / (x(i) - z(i)));
      x += step * (z - x);
      for (Eigen::Index i = 0; i < n; ++i)
        if (passive[static_cast<std::size_t>(i)] && x(i) <= tol) {
          passive[static_cast<std::size_t>(i)] = false;
          x(i) = 0.0;
        }
    }
  }
  return x;
}

namespace detail {

/// Nelder-Mead simplex minimization (standard coefficients).
template <class F, std::size_t D>
std::array<double, D> nelder_mead(F&& f, std::array<double, D> start, const std::array<double, D>& scale,
                                  int max_evaluations, double ftol) {
  using Point = std::array<double, D>;
  std::array<Point, D + 1> pts;
  std::array<double, D + 1> val;
  pts[0] = start;
  for (std::size_t i = 0; i < D; ++i) {
    pts[i + 1] = start;
    pts[i + 1][i] += scale[i];
  }
  int evals = 0;
  for (std::size_t i = 0; i <= D; ++i, ++evals) val[i] = f(pts[i]);
  while (evals < max_evaluations) {
    std::array<std::size_t, D + 1> order;
    for (std::size_t i = 0; i <= D; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return val[a] < val[b]; });
    const std::size_t best = order[0], worst = order[D], second = order[D - 1];
    if (std::abs(val[worst] - val[best]) <= ftol * (std::abs(val[best]) + 1e-300)) break;
    Point centroid{};
    for (std::size_t i = 0; i <= D; ++i)
      if (i != worst)
        for (std::size_t k = 0; k < D; ++k) centroid[k] += pts[i][k] / static_cast<double>(D);
    auto along = [&](double t) {
      Point p;
      for (std::size_t k = 0; k < D; ++k) p[k] = centroid[k] + t * (pts[worst][k] - centroid[k]);
      return p;
    };
    const Point reflected = along(-1.0);
    const double fr = f(reflected);
    ++evals;
    if (fr < val[best]) {
      const Point expanded = along(-2.0);
      const double fe = f(expanded);
      ++evals;
      if (fe < fr) {
        pts[worst] = expanded;
        val[worst] = fe;
      } else {
        pts[worst] = reflected;
        val[worst] = fr;
      }
    } else if (fr < val[second]) {
      pts[worst] = reflected;
      val[worst] = fr;
    } else {
      const Point contracted = fr < val[worst] ? along(-0.5) : along(0.5);
      const double fc = f(contracted);
      ++evals;
      if (fc < std::min(fr, val[worst])) {
        pts[worst] = contracted;
        val[worst] = fc;
      } else {
        for (std::size_t i = 0; i <= D; ++i) {
          if (i == best) continue;
          for (std::size_t k = 0; k < D; ++k) pts[i][k] = pts[best][k] + 0.5 * (pts[i][k] - pts[best][k]);
          val[i] = f(pts[i]);
          ++evals;
        }
      }
    }
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i <= D; ++i)
    if (val[i] < val[best]) best = i;
  return pts[best];
}

}  // namespace detail

struct ExtractOptions {
  bool fit_background = true;
  double residual_warning = 0.05;  // relative rms residual that raises `warning`
  int max_evaluations = 3000;
};

struct SidebandExtraction {
  int n_min = 0;
  std::vector<double> populations;  // normalized peak areas, sideband n_min + i
  double width = 0.0;               // shared FWHM, eV
  double eta = 0.0;                 // Lorentzian share
  double offset = 0.0;              // comb shift, eV
  double background_amplitude = 0.0;
  double background_center = 0.0;
  double background_sigma_left = 0.0;
  double background_sigma_right = 0.0;
  double residual = 0.0;  // |model - counts| / |counts|
  bool warning = false;
};

/// Global comb fit.  Peak areas and background height come from non-negative
/// least squares at fixed shape; width and mixing are scanned on a 20 x 11
/// grid over [0.1, 1] eV x [0, 1], then width, mixing, comb offset and the
/// background shape are refined by Nelder-Mead.
inline SidebandExtraction extract_sidebands(const RawSpectrum& s, const ExtractOptions& opt = {}) {
  s.validate();
  const auto m = static_cast<Eigen::Index>(s.counts.size());
  const Eigen::Map<const RVector> y(s.counts.data(), m);
  const double y_norm = y.norm();
  if (!(y_norm > 0.0)) throw ValidationError("extract_sidebands: spectrum has no counts");

  const double e0 = s.energy_axis.front(), e1 = s.energy_axis.back();
  const int n_lo = static_cast<int>(std::ceil(e0 / s.photon_energy));
  const int n_hi = static_cast<int>(std::floor(e1 / s.photon_energy));
  detail::require(n_lo <= 0 && n_hi >= 0, "extract_sidebands: energy axis must span the zero-loss line");
  const int peaks = n_hi - n_lo + 1;
  const Eigen::Index cols = peaks + (opt.fit_background ? 1 : 0);
  const double span = e1 - e0;

  // shape = {w, eta, offset, bg center, log sigma_left, log sigma_right}
  using Shape = std::array<double, 6>;
  auto design = [&](const Shape& p) {
    RMatrix a(m, cols);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double e = s.energy_axis[static_cast<std::size_t>(i)];
      for (int k = 0; k < peaks; ++k) a(i, k) = pseudo_voigt(e - (n_lo + k) * s.photon_energy - p[2], p[0], p[1]);
      if (opt.fit_background) a(i, peaks) = asymmetric_gaussian(e, p[3], std::exp(p[4]), std::exp(p[5]));
    }
    return a;
  };
  auto fit = [&](const Shape& p, RVector* coef) {
    if (!(p[0] > 1e-3) || p[1] < 0.0 || p[1] > 1.0 || std::abs(p[4]) > 6.0 || std::abs(p[5]) > 6.0)
      return std::numeric_limits<double>::infinity();
    const RMatrix a = design(p);
    const RVector x = nnls_normal(a.transpose() * a, a.transpose() * y);
    if (coef) *coef = x;
    return (a * x - y).squaredNorm();
  };

  std::vector<double> centers{0.5 * (e0 + e1)};
  if (opt.fit_background) centers = {e0 + 0.2 * span, e0 + 0.5 * span, e0 + 0.8 * span};
  const double log_sigma = std::log(span / 8.0);

  Shape best{};
  double best_r = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j <= 10; ++j)
      for (double c : centers) {
        const Shape p{0.1 + 0.9 * i / 19.0, j / 10.0, 0.0, c, log_sigma, log_sigma};
        const double r = fit(p, nullptr);
        if (r < best_r) {
          best_r = r;
          best = p;
        }
      }

  auto objective = [&](const Shape& p) {
    Shape q = p;
    if (!opt.fit_background) {
      q[3] = best[3];
      q[4] = q[5] = log_sigma;
    }
    return fit(q, nullptr);
  };
  const Shape scale{0.05, 0.1, 0.05, 0.05 * span, 0.3, 0.3};
  // Two restarts guard against a collapsed simplex.
  for (int round = 0; round < 2; ++round) best = detail::nelder_mead(objective, best, scale, opt.max_evaluations, 1e-15);

  RVector coef;
  const double r = fit(best, &coef);
  SidebandExtraction out;
  out.n_min = n_lo;
  const double area = coef.head(peaks).sum();
  if (!(area > 0.0)) throw NumericalError("extract_sidebands: no peak area in the fit");
  for (int k = 0; k < peaks; ++k) out.populations.push_back(coef(k) / area);
  out.width = best[0];
  out.eta = best[1];
  out.offset = best[2];
  if (opt.fit_background) {
    out.background_amplitude = coef(peaks);
    out.background_center = best[3];
    out.background_sigma_left = std::exp(best[4]);
    out.background_sigma_right = std::exp(best[5]);
  }
  out.residual = std::sqrt(r) / y_norm;
  out.warning = out.residual > opt.residual_warning;
  return out;
}

}  // namespace squirrels
