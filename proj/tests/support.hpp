#pragma once

// Random inputs and independent reference computations shared by the tests.

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "squirrels/squirrels.hpp"

namespace testing_support {

using namespace squirrels;

/// J_n(x) from its power series in 100-digit floating point.
inline double bessel_series_mp(int n, double x) {
  using Big = boost::multiprecision::cpp_bin_float_100;
  const int sign = (n < 0 && (n & 1)) ? -1 : 1;
  n = std::abs(n);
  const Big half = Big(x) / 2;
  const Big q = -half * half;
  Big term = 1;
  for (int k = 1; k <= n; ++k) term *= half / k;  // (x/2)^n / n!
  Big sum = term;
  for (int k = 1; k < 400; ++k) {
    term *= q / (Big(k) * Big(k + n));
    sum += term;
    if (term == 0 || abs(term) < abs(sum) * Big("1e-60")) break;
  }
  return sign * static_cast<double>(sum);
}

/// Amplitudes of exp(i [2 g1 sin(tau + theta) + 2 g2 sin(2 tau)]) as Fourier
/// coefficients, by the trapezoid rule (spectrally accurate for periodic
/// integrands).
inline std::complex<double> two_color_fourier(int n, double g1, double g2, double theta, int samples = 4096) {
  std::complex<double> acc{};
  for (int i = 0; i < samples; ++i) {
    const double tau = 2.0 * std::numbers::pi * i / samples;
    const double phase = 2.0 * g1 * std::sin(tau + theta) + 2.0 * g2 * std::sin(2.0 * tau) - n * tau;
    acc += std::complex<double>(std::cos(phase), std::sin(phase));
  }
  return acc / static_cast<double>(samples);
}

inline DensityMatrix random_density(std::mt19937_64& rng, const SidebandWindow& w, int rank = 0) {
  std::normal_distribution<double> nd;
  const auto sup = w.support();
  const int m = static_cast<int>(sup.size());
  const int r = rank > 0 ? rank : m;
  CMatrix g = CMatrix::Zero(w.size(), r);
  for (int n : sup)
    for (int c = 0; c < r; ++c) g(w.offset(n), c) = Complex(nd(rng), nd(rng));
  DensityMatrix rho{w, g * g.adjoint()};
  rho.entries /= rho.trace();
  return rho;
}

inline SidebandState random_state(std::mt19937_64& rng, const SidebandWindow& w) {
  std::normal_distribution<double> nd;
  SidebandState s{w, CVector::Zero(w.size())};
  for (int n : w.support()) s.amplitudes(w.offset(n)) = Complex(nd(rng), nd(rng));
  s.amplitudes.normalize();
  return s;
}

/// Pure state prepared from the zero-loss line, cropped to the sidebands
/// holding more than 1e-8 population and renormalized.
inline DensityMatrix prepared_truth(const Coupling& g, SidebandWindow* window = nullptr) {
  const SidebandState psi = prepare_pure(g);
  const SidebandWindow w = trimmed_window(psi, g.harmonic, 1e-8);
  DensityMatrix rho = DensityMatrix::pure(psi.cropped(w));
  rho.entries /= rho.trace();
  if (window) *window = w;
  return rho;
}

// ---------------------------------------------------------------------------
// Brute-force minimizer for three-level problems.
//
// rho = L L^dagger / tr(L L^dagger) with L complex lower-triangular covers
// every trace-one PSD 3x3 matrix without constraints.  A global grid over L
// picks the start; a zooming search over the full 3^9 neighbourhood stencil
// (every combination of -r, 0, +r per coordinate) then refines it, halving r
// whenever the centre is best.

struct ThreeLevelProblem {
  RMatrix gram;  // T^T T in the parameterization of the solver
  RVector rhs;   // T^T p
  double data_sq = 0.0;
  double alpha = 0.0;
  RVector prev;
  HermitianParameterization param{std::vector<int>{0, 1, 2}};

  double objective_of(const RVector& x) const {
    return x.dot(gram * x) - 2.0 * rhs.dot(x) + data_sq + alpha * (x - prev).squaredNorm();
  }
};

inline CMatrix density_from_factor(const std::array<double, 9>& v) {
  CMatrix l = CMatrix::Zero(3, 3);
  l(0, 0) = v[0];
  l(1, 1) = v[1];
  l(2, 2) = v[2];
  l(1, 0) = Complex(v[3], v[4]);
  l(2, 0) = Complex(v[5], v[6]);
  l(2, 1) = Complex(v[7], v[8]);
  CMatrix rho = l * l.adjoint();
  const double tr = rho.trace().real();
  return tr > 0.0 ? CMatrix(rho / tr) : CMatrix(CMatrix::Identity(3, 3) / 3.0);
}

inline CMatrix brute_force_three_level(const ThreeLevelProblem& p) {
  auto f = [&](const std::array<double, 9>& v) { return p.objective_of(p.param.from_matrix(density_from_factor(v))); };
  std::array<double, 9> best{};
  double best_f = std::numeric_limits<double>::infinity();
  const std::array<double, 3> diag{0.2, 0.6, 1.0}, off{-0.6, 0.0, 0.6};
  for (int code = 0; code < 19683; ++code) {
    std::array<double, 9> v{};
    int c = code;
    for (int k = 0; k < 9; ++k, c /= 3) v[k] = k < 3 ? diag[c % 3] : off[c % 3];
    const double fv = f(v);
    if (fv < best_f) {
      best_f = fv;
      best = v;
    }
  }
  double r = 0.3;
  while (r > 1e-8) {
    std::array<double, 9> step_best = best;
    double step_f = best_f;
    for (int code = 0; code < 19683; ++code) {
      std::array<double, 9> v = best;
      int c = code;
      for (int k = 0; k < 9; ++k, c /= 3) v[k] += (c % 3 - 1) * r;
      const double fv = f(v);
      if (fv < step_f) {
        step_f = fv;
        step_best = v;
      }
    }
    if (step_f < best_f) {
      best = step_best;
      best_f = step_f;
    } else {
      r *= 0.5;
    }
  }
  return density_from_factor(best);
}

}  // namespace testing_support
