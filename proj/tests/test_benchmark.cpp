#include <gtest/gtest.h>

#include "support.hpp"

using namespace squirrels;

TEST(Benchmark, TrimmedWindow) {
  const auto psi = prepare_pure(Coupling{0.63, 0, 2});
  const auto w = trimmed_window(psi, 2, 1e-8);
  EXPECT_EQ(w.support_stride, 2);
  EXPECT_EQ(w.n_min, -w.n_max);
  EXPECT_EQ(w.n_max % 2, 0);
  for (int n = psi.window.n_min; n <= psi.window.n_max; ++n)
    if (!w.contains(n)) EXPECT_LE(std::norm(psi.at(n)), 1e-8);
}

TEST(Benchmark, NoiselessRatioTwo) {
  BenchmarkConfig cfg;
  cfg.ratios = {2.0};
  cfg.counts.reset();
  cfg.seeds = 1;
  const auto t = benchmark_noise(cfg);
  ASSERT_EQ(t.cells.size(), 6u);
  for (const auto& c : t.cells) EXPECT_LE(c.error, 1e-2) << c.prep_strength;
}

TEST(Benchmark, WeakProbeIsWorseForEveryStrength) {
  BenchmarkConfig cfg;
  cfg.ratios = {0.3, 2.0};
  cfg.seeds = 2;
  const auto t = benchmark_noise(cfg);
  ASSERT_EQ(t.rows.size(), 2u);
  for (std::size_t s = 0; s < cfg.prep_strengths.size(); ++s)
    EXPECT_GT(t.rows[0].mean_error_per_strength[s], t.rows[1].mean_error_per_strength[s]) << cfg.prep_strengths[s];
  for (const auto& c : t.cells) EXPECT_TRUE(c.discrepancy_bracket_ok);
}

TEST(Benchmark, DeterministicAndSummarized) {
  BenchmarkConfig cfg;
  cfg.ratios = {1.0, 3.0};
  cfg.prep_strengths = {0.5, 0.9};
  cfg.seeds = 2;
  cfg.theta_count = 12;
  const auto a = benchmark_noise(cfg), b = benchmark_noise(cfg);
  ASSERT_EQ(a.cells.size(), 8u);
  for (std::size_t i = 0; i < a.cells.size(); ++i) EXPECT_EQ(a.cells[i].error, b.cells[i].error);
  for (const auto& row : a.rows) {
    double sum = 0.0;
    for (double e : row.mean_error_per_strength) sum += e;
    EXPECT_NEAR(row.mean_error, sum / 2.0, 1e-15);
    EXPECT_GE(row.std_error, 0.0);
  }
  cfg.seed = 2;
  EXPECT_NE(benchmark_noise(cfg).cells[0].error, a.cells[0].error);
}

TEST(Benchmark, Validation) {
  BenchmarkConfig cfg;
  cfg.ratios = {};
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = {};
  cfg.seeds = 0;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = {};
  cfg.counts = -1.0;
  EXPECT_THROW(cfg.validate(), ValidationError);
}
