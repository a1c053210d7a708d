#pragma once

// Reconstruction error versus probe/preparation coupling ratio under shot
// noise, for pure second-harmonic preparations probed at the fundamental.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <vector>

#include "squirrels/analysis.hpp"
#include "squirrels/forward.hpp"
#include "squirrels/parallel.hpp"
#include "squirrels/reconstruction.hpp"

namespace squirrels {

struct BenchmarkConfig {
  std::vector<double> ratios{0.5, 1.0, 2.0, 3.0, 3.5, 4.0, 5.0, 6.0};
  std::vector<double> prep_strengths{0.4, 0.666, 0.932, 1.198, 1.464, 1.73};
  std::optional<double> counts = 1e4;  // absent = noiseless
  int seeds = 4;                       // noise realizations per (ratio, strength)
  int theta_count = 24;                // uniform in [0, pi)
  double support_threshold = 1e-8;     // populations below this are cut from the window
  std::uint64_t seed = 1;
  ReconstructionConfig reconstruction;

  void validate() const {
    detail::require(!ratios.empty(), "benchmark: no ratios");
    detail::require(!prep_strengths.empty(), "benchmark: no preparation strengths");
    for (double r : ratios) detail::require(std::isfinite(r) && r > 0.0, "benchmark: ratios must be positive");
    for (double g : prep_strengths) detail::require(std::isfinite(g) && g > 0.0, "benchmark: strengths must be positive");
    detail::require(!counts || *counts > 0.0, "benchmark: counts must be positive");
    detail::require(seeds >= 1, "benchmark: seeds must be >= 1");
    detail::require(theta_count >= 2, "benchmark: theta_count must be >= 2");
    detail::require(support_threshold >= 0.0 && support_threshold < 1e-2, "benchmark: support_threshold out of range");
    reconstruction.validate();
  }
};

/// Smallest even-lattice symmetric window holding every sideband of `psi`
/// whose population exceeds `threshold`.
inline SidebandWindow trimmed_window(const SidebandState& psi, int stride, double threshold) {
  int half = 0;
  for (int n = psi.window.n_min; n <= psi.window.n_max; ++n)
    if (std::norm(psi.at(n)) > threshold) half = std::max(half, std::abs(n));
  half += half % stride;
  return SidebandWindow::symmetric(half, stride);
}

struct BenchmarkCell {
  double ratio = 0.0;
  double prep_strength = 0.0;
  int seed_index = 0;
  double error = 0.0;  // Frobenius
  double alpha = 0.0;
  double delta = 0.0;
  bool converged = true;
  bool discrepancy_bracket_ok = true;  // r(alpha) <= tau delta < r(next grid alpha)
};

struct BenchmarkRow {
  double ratio = 0.0;
  double mean_error = 0.0;
  double std_error = 0.0;
  std::vector<double> mean_error_per_strength;
};

struct BenchmarkTable {
  std::vector<BenchmarkRow> rows;
  std::vector<BenchmarkCell> cells;
};

/// Runs every (ratio, strength, seed) cell as an independent task.  Noise for
/// a cell is seeded from (seed, strength index, seed index), so a strength
/// sees the same shot-noise stream at every ratio.
inline BenchmarkTable benchmark_noise(const BenchmarkConfig& cfg) {
  cfg.validate();
  const auto grid = uniform_theta_grid(cfg.theta_count, 0.0, std::numbers::pi);
  const std::size_t nr = cfg.ratios.size(), ns = cfg.prep_strengths.size(), nk = static_cast<std::size_t>(cfg.seeds);
  BenchmarkTable table;
  table.cells.resize(nr * ns * nk);
  parallel_for(table.cells.size(), [&](std::size_t idx) {
    const std::size_t r = idx / (ns * nk), s = (idx / nk) % ns, k = idx % nk;
    BenchmarkCell& cell = table.cells[idx];
    cell.ratio = cfg.ratios[r];
    cell.prep_strength = cfg.prep_strengths[s];
    cell.seed_index = static_cast<int>(k);

    const Coupling prep{cell.prep_strength, 0.0, 2};
    const Coupling probe{cell.ratio * cell.prep_strength, 0.0, 1};
    const SidebandState psi = prepare_pure(prep);
    const SidebandWindow window = trimmed_window(psi, 2, cfg.support_threshold);
    DensityMatrix truth = DensityMatrix::pure(psi.cropped(window));
    truth.entries /= truth.trace();

    Spectrogram data = simulate_spectrogram(truth, probe, grid);
    if (cfg.counts) data = add_poisson_noise(data, *cfg.counts, cfg.seed * 1000003ULL + s * 1009ULL + k);
    const ReconstructionReport rep = squirrels_reconstruct(data, probe, window, cfg.reconstruction);
    cell.error = (rep.rho_hat.entries - truth.entries).norm();
    cell.alpha = rep.alpha_selected;
    cell.delta = rep.delta;
    cell.converged = rep.converged;
    const auto& sel = rep.selection;
    const double bound = cfg.reconstruction.tau * sel.delta;
    cell.discrepancy_bracket_ok =
        sel.flat || (sel.residual_at_alpha <= bound && sel.grid_index + 1 < sel.residuals.size() &&
                     sel.residuals[sel.grid_index + 1] > bound);
  });

  for (std::size_t r = 0; r < nr; ++r) {
    BenchmarkRow row;
    row.ratio = cfg.ratios[r];
    double sum = 0.0, sq = 0.0;
    for (std::size_t s = 0; s < ns; ++s) {
      double per = 0.0;
      for (std::size_t k = 0; k < nk; ++k) {
        const double e = table.cells[(r * ns + s) * nk + k].error;
        per += e;
        sum += e;
        sq += e * e;
      }
      row.mean_error_per_strength.push_back(per / static_cast<double>(nk));
    }
    const double n = static_cast<double>(ns * nk);
    row.mean_error = sum / n;
    row.std_error = std::sqrt(std::max(0.0, sq / n - row.mean_error * row.mean_error));
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace squirrels
