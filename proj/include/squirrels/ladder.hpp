#pragma once

// Index bookkeeping on the discrete momentum ladder and the phase-modulation
// unitary of a single electron-light interaction.
//
// Sideband N is the state displaced by N photon energies of the fundamental
// (positive = energy gain).  A coupling of harmonic h only connects indices
// that differ by a multiple of h.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include "squirrels/bessel.hpp"
#include "squirrels/error.hpp"

namespace squirrels {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

/// Contiguous range of sideband indices [n_min, n_max] plus the lattice that a
/// prepared state may occupy (every index, or even indices only).
struct SidebandWindow {
  int n_min = 0;
  int n_max = 0;
  int support_stride = 1;

  static SidebandWindow symmetric(int half_width, int stride = 1) {
    return SidebandWindow{-half_width, half_width, stride};
  }

  void validate() const {
    detail::require(n_min <= 0 && n_max >= 0,
                     "sideband window must contain index 0 (got [" + std::to_string(n_min) + ", " +
                         std::to_string(n_max) + "])");
    detail::require(support_stride == 1 || support_stride == 2, "support_stride must be 1 or 2");
  }

  int size() const { return n_max - n_min + 1; }
  int offset(int n) const { return n - n_min; }
  int index_at(int offset) const { return n_min + offset; }
  bool contains(int n) const { return n >= n_min && n <= n_max; }
  bool on_support(int n) const { return contains(n) && n % support_stride == 0; }

  /// Lattice indices in ascending order.
  std::vector<int> support() const {
    std::vector<int> out;
    for (int n = n_min; n <= n_max; ++n)
      if (n % support_stride == 0) out.push_back(n);
    return out;
  }

  SidebandWindow expanded(int rungs) const { return {n_min - rungs, n_max + rungs, support_stride}; }
  SidebandWindow with_stride(int stride) const { return {n_min, n_max, stride}; }

  bool operator==(const SidebandWindow&) const = default;
};

/// Complex coupling constant of one interaction, tagged with its harmonic.
struct Coupling {
  double magnitude = 0.0;
  double phase = 0.0;
  int harmonic = 1;

  void validate() const {
    detail::require(std::isfinite(magnitude) && magnitude >= 0.0, "coupling magnitude must be >= 0");
    detail::require(std::isfinite(phase), "coupling phase must be finite");
    detail::require(harmonic == 1 || harmonic == 2, "coupling harmonic must be 1 or 2");
  }
};

/// Rungs of padding needed on each side of a window so that the modulation by
/// `g` loses less than ~1e-13 amplitude at the edges.
inline int padding_rungs(const Coupling& g) {
  const double x = 2.0 * g.magnitude;
  const int baseline = static_cast<int>(std::ceil(x)) + 8;
  return g.harmonic * std::max(baseline, bessel_reach(x, 1e-13) + 1);
}

/// Pure state: amplitudes c_N over every integer index of the window.
struct SidebandState {
  SidebandWindow window;
  CVector amplitudes;

  static SidebandState zero_loss(const SidebandWindow& window) {
    window.validate();
    SidebandState s{window, CVector::Zero(window.size())};
    s.amplitudes(window.offset(0)) = 1.0;
    return s;
  }

  Complex at(int n) const { return window.contains(n) ? amplitudes(window.offset(n)) : Complex{}; }
  double norm() const { return amplitudes.norm(); }

  RVector populations() const { return amplitudes.cwiseAbs2(); }

  /// Copy onto another window; indices outside `target` are dropped.
  SidebandState cropped(const SidebandWindow& target) const {
    SidebandState out{target, CVector::Zero(target.size())};
    for (int n = std::max(target.n_min, window.n_min); n <= std::min(target.n_max, window.n_max); ++n)
      out.amplitudes(target.offset(n)) = amplitudes(window.offset(n));
    return out;
  }
};

struct DensityInvariants {
  double hermiticity_error = 0.0;
  double trace_error = 0.0;
  double min_eigenvalue = 0.0;
  double off_support_norm = 0.0;

  bool ok(double herm_tol = 1e-12, double trace_tol = 1e-10, double eig_tol = 1e-9) const {
    return hermiticity_error <= herm_tol && trace_error <= trace_tol && min_eigenvalue >= -eig_tol &&
           off_support_norm <= herm_tol;
  }
};

/// Density matrix over every integer index of its window.  When the window has
/// stride 2, rows and columns of odd indices are expected to vanish.
struct DensityMatrix {
  SidebandWindow window;
  CMatrix entries;

  static DensityMatrix pure(const SidebandState& state) {
    return {state.window, state.amplitudes * state.amplitudes.adjoint()};
  }

  /// I/m on the support lattice.
  static DensityMatrix maximally_mixed(const SidebandWindow& window) {
    DensityMatrix rho{window, CMatrix::Zero(window.size(), window.size())};
    const auto sup = window.support();
    for (int n : sup) rho.entries(window.offset(n), window.offset(n)) = 1.0 / static_cast<double>(sup.size());
    return rho;
  }

  static DensityMatrix zero(const SidebandWindow& window) {
    return {window, CMatrix::Zero(window.size(), window.size())};
  }

  Complex at(int k, int l) const {
    if (!window.contains(k) || !window.contains(l)) return {};
    return entries(window.offset(k), window.offset(l));
  }

  double trace() const { return entries.trace().real(); }
  double purity() const { return (entries * entries).trace().real(); }
  RVector populations() const { return entries.diagonal().real(); }

  DensityMatrix cropped(const SidebandWindow& target) const {
    DensityMatrix out = zero(target);
    const int lo = std::max(target.n_min, window.n_min);
    const int hi = std::min(target.n_max, window.n_max);
    if (lo > hi) return out;
    const int len = hi - lo + 1;
    out.entries.block(target.offset(lo), target.offset(lo), len, len) =
        entries.block(window.offset(lo), window.offset(lo), len, len);
    return out;
  }

  DensityInvariants invariants() const {
    DensityInvariants inv;
    if (entries.size() == 0) return inv;
    inv.hermiticity_error = (entries - entries.adjoint()).cwiseAbs().maxCoeff();
    inv.trace_error = std::abs(entries.trace() - Complex{1.0});
    const CMatrix herm = 0.5 * (entries + entries.adjoint());
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(herm, Eigen::EigenvaluesOnly);
    inv.min_eigenvalue = eig.eigenvalues().minCoeff();
    if (window.support_stride == 2) {
      double off = 0.0;
      for (int k = window.n_min; k <= window.n_max; ++k)
        for (int l = window.n_min; l <= window.n_max; ++l)
          if (k % 2 != 0 || l % 2 != 0) off = std::max(off, std::abs(entries(window.offset(k), window.offset(l))));
      inv.off_support_norm = off;
    }
    return inv;
  }
};

namespace detail {

// Entry <N|U|M> of the modulation unitary; `table` holds J_0 .. J_max at 2|g|.
inline Complex ladder_entry(const Coupling& g, double theta, int n, int m, const std::vector<double>& table) {
  const int diff = n - m;
  if (diff % g.harmonic != 0) return {};
  const int s = diff / g.harmonic;
  const int as = std::abs(s);
  if (as >= static_cast<int>(table.size())) return {};
  const double j = (s < 0 && (as & 1)) ? -table[static_cast<std::size_t>(as)] : table[static_cast<std::size_t>(as)];
  const double angle = diff * theta + s * g.phase;
  return {j * std::cos(angle), j * std::sin(angle)};
}

inline std::vector<double> ladder_table(const Coupling& g, int max_rungs) {
  return bessel_table(max_rungs / g.harmonic + 1, 2.0 * g.magnitude);
}

}  // namespace detail

/// Rectangular block of the modulation unitary: rows index `out`, columns
/// index `in`.  No window-size check; used when one side is already padded.
inline CMatrix coupling_block(const Coupling& g, double theta, const SidebandWindow& out, const SidebandWindow& in) {
  const int span = std::max(std::abs(out.n_max - in.n_min), std::abs(out.n_min - in.n_max));
  const auto table = detail::ladder_table(g, span);
  CMatrix u(out.size(), in.size());
  for (int c = 0; c < in.size(); ++c)
    for (int r = 0; r < out.size(); ++r)
      u(r, c) = detail::ladder_entry(g, theta, out.index_at(r), in.index_at(c), table);
  return u;
}

/// Phase-modulation unitary of coupling `g` at relative delay `theta`
/// (radians of the fundamental cycle):
///
///   <N|U|M> = exp(i[(N-M) theta + s arg g]) J_s(2|g|),  s = (N-M)/h,
///
/// and zero when h does not divide N-M.  With h = 1 and arg g = 0 this is
/// exp(i(N-M)theta) J_{N-M}(2|g|).  The matrix is truncated to `window`,
/// which must hold the padding returned by padding_rungs(g) on both sides of
/// index 0; columns whose padded neighbourhood lies in the window are unit
/// vectors to ~1e-13.
inline CMatrix coupling_unitary(const Coupling& g, double theta, const SidebandWindow& window) {
  g.validate();
  window.validate();
  const int pad = padding_rungs(g);
  if (window.n_min > -pad || window.n_max < pad)
    throw ValidationError("window [" + std::to_string(window.n_min) + ", " + std::to_string(window.n_max) +
                          "] too small for coupling |g| = " + std::to_string(g.magnitude) + " (needs +-" +
                          std::to_string(pad) + " rungs)");
  return coupling_block(g, theta, window, window);
}

/// U rho U^dagger.
inline DensityMatrix apply_unitary(const CMatrix& u, const DensityMatrix& rho) {
  if (u.rows() != rho.entries.rows() || u.cols() != rho.entries.cols())
    throw ValidationError("apply_unitary: dimension mismatch (" + std::to_string(u.rows()) + "x" +
                          std::to_string(u.cols()) + " vs " + std::to_string(rho.entries.rows()) + ")");
  return {rho.window, u * rho.entries * u.adjoint()};
}

}  // namespace squirrels
