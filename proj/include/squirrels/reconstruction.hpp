#pragma once

// Density-matrix reconstruction from phase-resolved sideband spectrograms.
//
// The unknown rho lives on a support lattice (all indices, or even indices
// only).  It is flattened to a real vector
//
//   x = ( rho_aa ... ; sqrt2 Re rho_ab (a<b) ... ; sqrt2 Im rho_ab (a<b) ... )
//
// so that the Hilbert-Schmidt norm of rho equals |x|.  The measurement map
// rho -> { <l|U(theta) rho U(theta)^dagger|l> } becomes a real matrix T and the
// estimator
//
//   rho_alpha = argmin |T x - p|^2 + alpha |x - x_prev|^2,  tr rho = 1, rho >= 0
//
// is solved by accelerated projected gradient.  Projection onto the trace-one
// PSD set = eigendecomposition + projection of the spectrum onto the simplex.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "squirrels/error.hpp"
#include "squirrels/forward.hpp"
#include "squirrels/ladder.hpp"
#include "squirrels/parallel.hpp"

namespace squirrels {

/// Index map between Hermitian matrices on a support lattice and R^{m^2}.
class HermitianParameterization {
 public:
  HermitianParameterization() = default;
  explicit HermitianParameterization(std::vector<int> support) : support_(std::move(support)) {
    const int m = dimension();
    for (int a = 0; a < m; ++a)
      for (int b = a + 1; b < m; ++b) pairs_.push_back({a, b});
  }

  const std::vector<int>& support() const { return support_; }
  int dimension() const { return static_cast<int>(support_.size()); }
  int size() const { return dimension() * dimension(); }
  int pair_count() const { return static_cast<int>(pairs_.size()); }
  std::pair<int, int> pair(int i) const { return pairs_[static_cast<std::size_t>(i)]; }

  RVector from_matrix(const CMatrix& h) const {
    const int m = dimension(), np = pair_count();
    RVector x(size());
    for (int a = 0; a < m; ++a) x(a) = h(a, a).real();
    for (int i = 0; i < np; ++i) {
      const auto [a, b] = pairs_[static_cast<std::size_t>(i)];
      x(m + i) = std::numbers::sqrt2 * h(a, b).real();
      x(m + np + i) = std::numbers::sqrt2 * h(a, b).imag();
    }
    return x;
  }

  CMatrix to_matrix(const RVector& x) const {
    const int m = dimension(), np = pair_count();
    CMatrix h(m, m);
    for (int a = 0; a < m; ++a) h(a, a) = x(a);
    for (int i = 0; i < np; ++i) {
      const auto [a, b] = pairs_[static_cast<std::size_t>(i)];
      const Complex z(x(m + i) / std::numbers::sqrt2, x(m + np + i) / std::numbers::sqrt2);
      h(a, b) = z;
      h(b, a) = std::conj(z);
    }
    return h;
  }

  RVector pack(const DensityMatrix& rho) const {
    const int m = dimension();
    CMatrix h(m, m);
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b) h(a, b) = rho.at(support_[static_cast<std::size_t>(a)], support_[static_cast<std::size_t>(b)]);
    return from_matrix(h);
  }

  DensityMatrix unpack(const RVector& x, const SidebandWindow& window) const {
    const CMatrix h = to_matrix(x);
    DensityMatrix rho = DensityMatrix::zero(window);
    const int m = dimension();
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b)
        rho.entries(window.offset(support_[static_cast<std::size_t>(a)]), window.offset(support_[static_cast<std::size_t>(b)])) = h(a, b);
    return rho;
  }

 private:
  std::vector<int> support_;
  std::vector<std::pair<int, int>> pairs_;
};

/// Real matrix of the measurement map.  Rows are theta-major: row
/// j * detector.size() + r is sideband detector.index_at(r) at theta_grid[j],
/// matching Spectrogram::stacked().
struct ForwardOperator {
  RMatrix matrix;
  SidebandWindow window;
  SidebandWindow detector;
  std::vector<double> theta_grid;
  Coupling probe;
  HermitianParameterization parameterization;

  RVector apply(const RVector& x) const { return matrix * x; }
  RVector apply(const DensityMatrix& rho) const { return matrix * parameterization.pack(rho); }

  Spectrogram to_spectrogram(const RVector& stacked) const {
    Spectrogram s{RMatrix(detector.size(), static_cast<Eigen::Index>(theta_grid.size())), theta_grid, probe, detector,
                  std::nullopt};
    s.populations = Eigen::Map<const RMatrix>(stacked.data(), detector.size(), static_cast<Eigen::Index>(theta_grid.size()));
    return s;
  }
};

/// Builds T for states on `window` (its support lattice) read out on `detector`.
inline ForwardOperator assemble_forward_operator(const Coupling& probe, const std::vector<double>& theta_grid,
                                                 const SidebandWindow& window, const SidebandWindow& detector) {
  probe.validate();
  window.validate();
  detector.validate();
  validate_theta_grid(theta_grid);

  ForwardOperator op;
  op.window = window;
  op.detector = detector.with_stride(1);
  op.theta_grid = theta_grid;
  op.probe = probe;
  op.parameterization = HermitianParameterization(window.support());
  const auto& param = op.parameterization;
  const int m = param.dimension(), np = param.pair_count(), rows = op.detector.size();
  op.matrix.resize(static_cast<Eigen::Index>(rows) * static_cast<Eigen::Index>(theta_grid.size()), param.size());

  // Columns of U restricted to the support lattice.
  SidebandWindow dense = window.with_stride(1);
  std::vector<int> support_offsets;
  for (int n : param.support()) support_offsets.push_back(dense.offset(n));

  parallel_for(theta_grid.size(), [&](std::size_t j) {
    const CMatrix full = coupling_block(probe, theta_grid[j], op.detector, dense);
    CMatrix u(rows, m);
    for (int a = 0; a < m; ++a) u.col(a) = full.col(support_offsets[static_cast<std::size_t>(a)]);
    const Eigen::Index base = static_cast<Eigen::Index>(j) * rows;
    for (int r = 0; r < rows; ++r) {
      for (int a = 0; a < m; ++a) op.matrix(base + r, a) = std::norm(u(r, a));
      for (int i = 0; i < np; ++i) {
        const auto [a, b] = param.pair(i);
        const Complex z = u(r, a) * std::conj(u(r, b));
        op.matrix(base + r, m + i) = std::numbers::sqrt2 * z.real();
        op.matrix(base + r, m + np + i) = -std::numbers::sqrt2 * z.imag();
      }
    }
  });
  return op;
}

inline ForwardOperator assemble_forward_operator(const Coupling& probe, const std::vector<double>& theta_grid,
                                                 const SidebandWindow& window) {
  return assemble_forward_operator(probe, theta_grid, window, detection_window(window, probe));
}

/// 2-norm condition number of T (ratio of extreme singular values).
inline double condition_number(const ForwardOperator& op) {
  Eigen::JacobiSVD<RMatrix> svd(op.matrix);
  const auto& sv = svd.singularValues();
  const double smallest = sv(sv.size() - 1);
  return smallest > 0.0 ? sv(0) / smallest : std::numeric_limits<double>::infinity();
}

// ---------------------------------------------------------------------------
// Projection onto { tr rho = 1, rho >= 0 }

/// Euclidean projection of v onto the probability simplex.
inline RVector project_to_simplex(const RVector& v) {
  std::vector<double> sorted(v.data(), v.data() + v.size());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0, shift = 0.0;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    cumulative += sorted[k];
    const double t = (cumulative - 1.0) / static_cast<double>(k + 1);
    if (sorted[k] - t > 0.0) shift = t;
  }
  return (v.array() - shift).max(0.0).matrix();
}

inline CMatrix project_to_density(const CMatrix& h) {
  const CMatrix sym = 0.5 * (h + h.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(sym);
  const RVector w = project_to_simplex(eig.eigenvalues());
  return eig.eigenvectors() * w.asDiagonal() * eig.eigenvectors().adjoint();
}

// ---------------------------------------------------------------------------
// Regularized least squares

struct SolverOptions {
  double tolerance = 1e-9;      // relative objective change
  double kkt_tolerance = 1e-7;  // scaled projected-gradient norm, see SolveResult::kkt_residual
  int max_steps = 20000;
};

struct SolveResult {
  RVector x;
  bool converged = false;
  int steps = 0;
  double objective = 0.0;
  double residual = 0.0;      // |T x - p|
  double kkt_residual = 0.0;  // |x - P(x - grad/L)| * L / |grad scale|
  std::vector<double> objective_history;
};

/// The quadratic data of one reconstruction (T^T T, T^T p, |p|^2) shared by
/// every solve on the same spectrogram.
class TikhonovProblem {
 public:
  TikhonovProblem(const ForwardOperator& op, const RVector& data) : op_(&op), data_(data) {
    detail::require(data.size() == op.matrix.rows(), "data length does not match the forward operator");
    gram_ = op.matrix.transpose() * op.matrix;
    rhs_ = op.matrix.transpose() * data;
    data_sq_ = data.squaredNorm();
    gram_norm_ = largest_eigenvalue(gram_);
  }

  const ForwardOperator& op() const { return *op_; }
  const RVector& data() const { return data_; }
  double data_norm() const { return std::sqrt(data_sq_); }
  /// Largest eigenvalue of T^T T (= |T|^2), by power iteration.
  double operator_norm_sq() const { return gram_norm_; }
  int dimension() const { return op_->parameterization.dimension(); }

  double residual(const RVector& x) const { return (op_->matrix * x - data_).norm(); }

  RVector project(const RVector& x) const {
    const auto& p = op_->parameterization;
    return p.from_matrix(project_to_density(p.to_matrix(x)));
  }

  double objective(const RVector& x, double alpha, const RVector& prev) const {
    const double quad = x.dot(gram_ * x) - 2.0 * rhs_.dot(x) + data_sq_;
    return std::max(quad, 0.0) + alpha * (x - prev).squaredNorm();
  }

  /// argmin |T x - p|^2 + alpha |x - prev|^2 over trace-one PSD x, starting
  /// from the projection of `start`.  FISTA with step 1/L and a restart
  /// whenever the objective would increase, so accepted iterates decrease the
  /// objective monotonically.
  SolveResult solve(double alpha, const RVector& prev, const RVector& start, const SolverOptions& opt = {}) const {
    detail::require(alpha > 0.0, "alpha must be positive");
    const double lipschitz = 2.0 * (gram_norm_ + alpha);
    const double step = 1.0 / lipschitz;
    const double scale = data_sq_ + alpha * prev.squaredNorm();
    const double kkt_scale = std::max(1.0, 2.0 * rhs_.norm() + 2.0 * alpha * prev.norm());

    SolveResult res;
    RVector x = project(start);
    RVector y = x;
    double f = objective(x, alpha, prev);
    double t = 1.0;
    bool restarted = false;
    int quiet = 0;
    res.objective_history.push_back(f);
    for (res.steps = 0; res.steps < opt.max_steps; ++res.steps) {
      const RVector grad = 2.0 * (gram_ * y - rhs_) + 2.0 * alpha * (y - prev);
      RVector next = project(y - step * grad);
      const double f_next = objective(next, alpha, prev);
      if (f_next > f) {
        if (restarted) {
          // A plain projected-gradient step from x no longer decreases the
          // objective: x is optimal to working precision.
          res.converged = true;
          break;
        }
        restarted = true;
        t = 1.0;
        y = x;
        continue;
      }
      restarted = false;
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      y = next + ((t - 1.0) / t_next) * (next - x);
      const double change = f - f_next;
      // Small objective decrease alone stalls early on flat valleys; also
      // require the gradient mapping at y to be small.
      const double kkt_y = (next - y).norm() * lipschitz / kkt_scale;
      x = std::move(next);
      f = f_next;
      t = t_next;
      res.objective_history.push_back(f);
      quiet = change <= opt.tolerance * scale && kkt_y <= opt.kkt_tolerance ? quiet + 1 : 0;
      if (quiet >= 5) {
        res.converged = true;
        ++res.steps;
        break;
      }
    }
    res.x = std::move(x);
    res.objective = f;
    res.residual = residual(res.x);
    const RVector grad = 2.0 * (gram_ * res.x - rhs_) + 2.0 * alpha * (res.x - prev);
    res.kkt_residual = (res.x - project(res.x - step * grad)).norm() * lipschitz / kkt_scale;
    return res;
  }

  /// `iterations` rounds of iterated Tikhonov starting from `prior`
  /// (rho^{(0)}); returns every iterate.  Round j starts from `warm[j]` when
  /// given, otherwise from the previous round's result.
  std::vector<SolveResult> solve_iterated(double alpha, int iterations, const RVector& prior,
                                          const SolverOptions& opt = {},
                                          const std::vector<SolveResult>* warm = nullptr) const {
    std::vector<SolveResult> out;
    RVector prev = prior;
    for (int j = 0; j < iterations; ++j) {
      const auto jj = static_cast<std::size_t>(j);
      const RVector& start = (warm && jj < warm->size()) ? (*warm)[jj].x : prev;
      out.push_back(solve(alpha, prev, start, opt));
      prev = out.back().x;
    }
    return out;
  }

 private:
  static double largest_eigenvalue(const RMatrix& a) {
    if (a.rows() == 0) return 0.0;
    RVector v = RVector::LinSpaced(a.rows(), 1.0, 2.0).normalized();
    double lambda = 0.0;
    for (int it = 0; it < 1000; ++it) {
      RVector w = a * v;
      const double norm = w.norm();
      if (norm == 0.0) return 0.0;
      w /= norm;
      const double next = w.dot(a * w);
      v = std::move(w);
      if (std::abs(next - lambda) <= 1e-12 * std::abs(next)) {
        lambda = next;
        break;
      }
      lambda = next;
    }
    // Power iteration approaches from below; a small margin keeps 1/L a safe step.
    return lambda * 1.02;
  }

  const ForwardOperator* op_;
  RVector data_;
  RMatrix gram_;
  RVector rhs_;
  double data_sq_ = 0.0;
  double gram_norm_ = 0.0;
};

struct SolveOutcome {
  DensityMatrix rho;
  SolveResult detail;
};

/// Single constrained Tikhonov solve on a spectrogram.
inline SolveOutcome solve_tikhonov_psd(const ForwardOperator& op, const Spectrogram& p, double alpha,
                                       const DensityMatrix& rho_prev, const SolverOptions& opt = {}) {
  detail::require(alpha > 0.0, "alpha must be positive");
  detail::require(p.window == op.detector && p.theta_grid == op.theta_grid,
                  "spectrogram layout does not match the forward operator");
  const TikhonovProblem problem(op, p.stacked());
  const RVector prev = op.parameterization.pack(rho_prev);
  SolveResult r = problem.solve(alpha, prev, prev, opt);
  return {op.parameterization.unpack(r.x, op.window), std::move(r)};
}

// ---------------------------------------------------------------------------
// Regularization parameter

struct AlphaGrid {
  double lower = 1e-8;  // multiples of |T|^2
  double upper = 1e2;
  int points = 40;
};

struct ReconstructionConfig {
  int alpha_iterations = 3;
  double tau = 1.01;
  AlphaGrid alpha_grid;
  SolverOptions solver;
  double bisection_width = 0.05;  // relative width of the final alpha bracket
  std::optional<DensityMatrix> initial_guess;  // rho^{(0)}; zero matrix when absent

  void validate() const {
    detail::require(alpha_iterations >= 1, "alpha_iterations must be >= 1");
    detail::require(tau > 1.0, "tau must be > 1");
    detail::require(alpha_grid.lower > 0.0 && alpha_grid.upper > alpha_grid.lower, "alpha grid bounds invalid");
    detail::require(alpha_grid.points >= 2, "alpha grid needs at least 2 points");
    detail::require(solver.tolerance > 0.0 && solver.kkt_tolerance > 0.0 && solver.max_steps >= 1, "solver settings invalid");
    detail::require(bisection_width > 0.0, "bisection width must be positive");
  }
};

struct AlphaSelection {
  double alpha = 0.0;
  double delta = 0.0;
  std::vector<double> grid;
  std::vector<double> residuals;  // |T rho_alpha^{(J)} - p| on the grid
  std::size_t grid_index = 0;     // largest grid point inside the discrepancy set
  double residual_at_alpha = 0.0;
  bool flat = false;              // every grid point satisfied r <= tau delta
  bool all_converged = true;
  double monotonicity_slack = 0.0;
  std::vector<SolveResult> iterates;  // the J iterated solutions at `alpha`
};

/// Discrepancy principle: delta = r(smallest grid alpha); alpha = largest
/// grid point with r <= tau delta, refined by bisection (in log alpha) against
/// the next grid point.  Throws NumericalError when r(alpha) is not monotone
/// non-decreasing on the grid.
inline AlphaSelection select_alpha_discrepancy(const TikhonovProblem& problem, const ReconstructionConfig& config,
                                               const RVector& prior) {
  config.validate();
  const auto& g = config.alpha_grid;
  const double norm_sq = problem.operator_norm_sq();
  AlphaSelection sel;
  sel.grid.resize(static_cast<std::size_t>(g.points));
  for (int i = 0; i < g.points; ++i)
    sel.grid[static_cast<std::size_t>(i)] =
        norm_sq * std::exp(std::log(g.lower) + (std::log(g.upper) - std::log(g.lower)) * i / (g.points - 1));

  // Continuation from the largest alpha down: every solve starts from the
  // neighbouring larger-alpha solution, which already has a residual no smaller
  // than the one being sought.
  std::vector<std::vector<SolveResult>> runs(sel.grid.size());
  for (std::size_t i = sel.grid.size(); i-- > 0;)
    runs[i] = problem.solve_iterated(sel.grid[i], config.alpha_iterations, prior, config.solver,
                                     i + 1 < sel.grid.size() ? &runs[i + 1] : nullptr);
  sel.residuals.resize(sel.grid.size());
  for (std::size_t i = 0; i < runs.size(); ++i) {
    sel.residuals[i] = runs[i].back().residual;
    for (const auto& r : runs[i]) sel.all_converged = sel.all_converged && r.converged;
  }

  // Monotone up to the residual resolution implied by the objective tolerance.
  sel.monotonicity_slack = std::sqrt(config.solver.tolerance) * problem.data_norm();
  const double slack = sel.monotonicity_slack;
  for (std::size_t i = 1; i < sel.residuals.size(); ++i)
    if (sel.residuals[i] < sel.residuals[i - 1] - slack)
      throw NumericalError("discrepancy curve is not monotone in alpha at grid point " + std::to_string(i) +
                           " (" + std::to_string(sel.residuals[i - 1]) + " -> " + std::to_string(sel.residuals[i]) +
                           ")");

  sel.delta = sel.residuals.front();
  const double bound = config.tau * sel.delta;
  std::size_t idx = 0;
  for (std::size_t i = 0; i < sel.residuals.size(); ++i)
    if (sel.residuals[i] <= bound) idx = i;
  sel.grid_index = idx;

  if (idx + 1 == sel.grid.size()) {
    sel.flat = true;
    sel.alpha = sel.grid.front();
    sel.grid_index = 0;
    sel.iterates = std::move(runs.front());
    sel.residual_at_alpha = sel.residuals.front();
    return sel;
  }

  double lo = sel.grid[idx], hi = sel.grid[idx + 1];
  std::vector<SolveResult> best = std::move(runs[idx]);
  std::vector<SolveResult> upper = std::move(runs[idx + 1]);
  while (hi / lo > 1.0 + config.bisection_width) {
    const double mid = std::sqrt(lo * hi);
    auto trial = problem.solve_iterated(mid, config.alpha_iterations, prior, config.solver, &upper);
    if (trial.back().residual <= bound) {
      lo = mid;
      best = std::move(trial);
    } else {
      hi = mid;
      upper = std::move(trial);
    }
  }
  sel.alpha = lo;
  sel.residual_at_alpha = best.back().residual;
  sel.iterates = std::move(best);
  return sel;
}

// ---------------------------------------------------------------------------
// Full reconstruction

struct ReconstructionReport {
  DensityMatrix rho_hat;
  double alpha_selected = 0.0;
  double delta = 0.0;
  std::vector<double> residual_history;  // |T rho^{(j)} - p|, j = 1..J
  double snr = 0.0;                      // |p| / delta
  Spectrogram refit_spectrogram;
  AlphaSelection selection;
  bool converged = true;
};

/// Reconstructs rho on `window` from a spectrogram probed with `probe`.
inline ReconstructionReport squirrels_reconstruct(const Spectrogram& p, const Coupling& probe,
                                                  const SidebandWindow& window, const ReconstructionConfig& config = {}) {
  p.validate();
  config.validate();
  const ForwardOperator op = assemble_forward_operator(probe, p.theta_grid, window, p.window);
  const TikhonovProblem problem(op, p.stacked());
  const RVector prior = config.initial_guess ? op.parameterization.pack(*config.initial_guess)
                                             : RVector::Zero(op.parameterization.size());
  ReconstructionReport rep;
  rep.selection = select_alpha_discrepancy(problem, config, prior);
  const auto& iterates = rep.selection.iterates;
  rep.alpha_selected = rep.selection.alpha;
  rep.delta = rep.selection.delta;
  for (const auto& it : iterates) {
    rep.residual_history.push_back(it.residual);
    rep.converged = rep.converged && it.converged;
  }
  rep.rho_hat = op.parameterization.unpack(iterates.back().x, window);
  rep.snr = rep.delta > 0.0 ? problem.data_norm() / rep.delta : std::numeric_limits<double>::infinity();
  rep.refit_spectrogram = op.to_spectrogram(op.apply(iterates.back().x));
  rep.refit_spectrogram.probe = probe;
  return rep;
}

}  // namespace squirrels
