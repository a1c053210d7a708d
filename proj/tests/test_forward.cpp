#include <gtest/gtest.h>

#include "support.hpp"

using namespace squirrels;
using testing_support::bessel_series_mp;

namespace {

double mean_momentum(const RVector& pops, const SidebandWindow& w) {
  double m = 0.0;
  for (int i = 0; i < w.size(); ++i) m += w.index_at(i) * pops(i);
  return m;
}

double third_moment(const SidebandState& s) {
  double m = 0.0;
  for (int i = 0; i < s.window.size(); ++i) m += std::pow(s.window.index_at(i), 3) * std::norm(s.amplitudes(i));
  return m;
}

}  // namespace

TEST(Modulate, ZeroCouplingLeavesStateUnchanged) {
  std::mt19937_64 rng(1);
  const auto psi = testing_support::random_state(rng, SidebandWindow::symmetric(3));
  const auto out = modulate(psi, Coupling{0.0, 0.0, 1}, 0.4).cropped(psi.window);
  EXPECT_LT((out.amplitudes - psi.amplitudes).norm(), 1e-15);
}

TEST(Modulate, SecondHarmonicFromZeroLoss) {
  const auto psi = prepare_pure(Coupling{1.85, 0.0, 2});
  EXPECT_NEAR(psi.norm(), 1.0, 1e-10);
  for (int n = -14; n <= 14; ++n) {
    if (n % 2 != 0) {
      EXPECT_EQ(psi.at(n), Complex{});
    } else {
      EXPECT_NEAR(std::norm(psi.at(n)), std::pow(bessel_series_mp(n / 2, 3.70), 2), 1e-12) << n;
    }
  }
}

TEST(Modulate, OrderOfColorsDoesNotMatter) {
  const auto zero = SidebandState::zero_loss(SidebandWindow{0, 0, 1});
  const Coupling g1{1.2, 0.3, 1}, g2{0.8, -0.5, 2};
  const auto a = modulate(modulate(zero, g1, 0.6), g2, 0.6);
  const auto b = modulate(modulate(zero, g2, 0.6), g1, 0.6);
  const auto w = SidebandWindow::symmetric(std::max(a.window.n_max, b.window.n_max));
  EXPECT_LT((a.cropped(w).amplitudes - b.cropped(w).amplitudes).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Modulate, PreservesNormAndMeanMomentumOfZeroLoss) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> mag(0.0, 4.0), ang(-3.0, 3.0);
  for (int i = 0; i < 50; ++i) {
    auto psi = SidebandState::zero_loss(SidebandWindow{0, 0, 1});
    psi = modulate(psi, Coupling{mag(rng), ang(rng), 2}, ang(rng));
    psi = modulate(psi, Coupling{mag(rng), ang(rng), 1}, ang(rng));
    EXPECT_NEAR(psi.norm(), 1.0, 1e-10);
    EXPECT_NEAR(mean_momentum(psi.populations(), psi.window), 0.0, 1e-8);
  }
}

TEST(TwoColor, ReducesToSingleColor) {
  const auto w = SidebandWindow::symmetric(20);
  const double theta = 0.9;
  const auto s = two_color_amplitudes(Coupling{1.7, 0, 1}, Coupling{0.0, 0, 2}, theta, w);
  for (int n = -12; n <= 12; ++n)
    EXPECT_LT(std::abs(s.at(n) - std::polar(bessel_series_mp(n, 3.4), n * theta)), 1e-12);
}

TEST(TwoColor, MatchesFourierIntegral) {
  const auto w = SidebandWindow::symmetric(40);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> g(0.0, 2.5), th(0.0, 2.0 * std::numbers::pi);
  for (int trial = 0; trial < 8; ++trial) {
    const double g1 = g(rng), g2 = g(rng), theta = th(rng);
    const auto s = two_color_amplitudes(Coupling{g1, 0, 1}, Coupling{g2, 0, 2}, theta, w);
    EXPECT_NEAR(s.norm(), 1.0, 1e-10);
    for (int n = -20; n <= 20; ++n)
      EXPECT_LT(std::abs(s.at(n) - testing_support::two_color_fourier(n, g1, g2, theta)), 1e-12) << n;
    EXPECT_NEAR(mean_momentum(s.populations(), s.window), 0.0, 1e-8);
  }
}

TEST(TwoColor, AsymmetryFlipsHalfCycleApart) {
  // Populations repeat with period pi in theta; gain/loss dominance swaps
  // between theta and theta + pi/2.
  const auto w = SidebandWindow::symmetric(24);
  const Coupling g1{2.20, 0, 1}, g2{0.76, 0, 2};
  for (double theta : {0.3, 0.5, 1.0}) {
    const auto a = two_color_amplitudes(g1, g2, theta, w);
    const auto b = two_color_amplitudes(g1, g2, theta + std::numbers::pi / 2, w);
    const auto c = two_color_amplitudes(g1, g2, theta + std::numbers::pi, w);
    const double ma = third_moment(a), mb = third_moment(b);
    EXPECT_GT(std::abs(ma), 1.0);
    EXPECT_LT(ma * mb, 0.0);
    EXPECT_NEAR(ma, -mb, 1e-8);
    EXPECT_LT((a.populations() - c.populations()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(TwoColor, RejectsSmallWindow) {
  EXPECT_THROW(two_color_amplitudes(Coupling{2.2, 0, 1}, Coupling{0.76, 0, 2}, 0.0, SidebandWindow::symmetric(4)),
               ValidationError);
}

TEST(Dispersion, ChiFromGeometry) {
  DispersionGeometry g;
  g.distance = 0.0;
  EXPECT_EQ(chi_from_geometry(g), 0.0);
  g.distance = 1.5e-3;
  const double chi = chi_from_geometry(g);
  g.distance = 3.0e-3;
  EXPECT_NEAR(chi_from_geometry(g), 2.0 * chi, 1e-15);

  // Independent evaluation: beta, gamma from 120 keV; phase = d hbar w^2 / (2 m gamma^3 v^3).
  const double c = 299792458.0, hbar = 1.054571817e-34, qe = 1.602176634e-19;
  const double me = 9.1093837015e-31;
  const double gamma = 1.0 + 120e3 / 510998.95;
  const double v = c * std::sqrt(1.0 - 1.0 / (gamma * gamma));
  const double w = 2.0 * std::numbers::pi * c / 800e-9;
  const double want = 1.5e-3 * hbar * w * w / (2.0 * me * std::pow(gamma, 3) * std::pow(v, 3));
  EXPECT_NEAR(chi, want, 1e-8 * want);
  EXPECT_NEAR(chi, 0.04699, 5e-5);
  (void)qe;

  g.kinetic_energy = 0.0;
  EXPECT_THROW(chi_from_geometry(g), ValidationError);
}

TEST(Dispersion, PhaseAndPopulations) {
  std::mt19937_64 rng(6);
  const auto w = SidebandWindow::symmetric(5);
  const DensityMatrix rho = testing_support::random_density(rng, w);
  EXPECT_LT((apply_dispersion(rho, 0.0).entries - rho.entries).norm(), 1e-15);
  const DensityMatrix out = apply_dispersion(rho, 0.37);
  EXPECT_LT((out.populations() - rho.populations()).cwiseAbs().maxCoeff(), 1e-15);
  for (int k = -5; k <= 5; ++k)
    for (int l = -5; l <= 5; ++l)
      EXPECT_LT(std::abs(out.at(k, l) - rho.at(k, l) * std::polar(1.0, -0.37 * (k * k - l * l))), 1e-14);
}

TEST(Spectrogram, ZeroLossColumnsAreBesselSquared) {
  const auto rho = DensityMatrix::pure(SidebandState::zero_loss(SidebandWindow{0, 0, 1}));
  const Coupling probe{1.3, 0, 1};
  const auto s = simulate_spectrogram(rho, probe, uniform_theta_grid(7, 0.0, 2.0 * std::numbers::pi));
  for (int j = 0; j < s.columns(); ++j)
    for (int n = -8; n <= 8; ++n)
      EXPECT_NEAR(s.populations(s.window.offset(n), j), std::pow(bessel_series_mp(n, 2.6), 2), 1e-12);
}

TEST(Spectrogram, ColumnsAreProbabilityVectors) {
  std::mt19937_64 rng(8);
  for (int stride : {1, 2}) {
    const auto rho = testing_support::random_density(rng, SidebandWindow::symmetric(4, stride));
    const auto s = simulate_spectrogram(rho, Coupling{2.16, 0, 1}, uniform_theta_grid(13, 0.0, std::numbers::pi));
    EXPECT_GE(s.populations.minCoeff(), -1e-12);
    for (int j = 0; j < s.columns(); ++j) EXPECT_NEAR(s.populations.col(j).sum(), 1.0, 1e-9);
  }
}

TEST(Spectrogram, PeriodDependsOnSupport) {
  std::mt19937_64 rng(10);
  const double pi = std::numbers::pi;
  const std::vector<double> base{0.1, 0.8, 1.9}, shifted_pi{0.1 + pi, 0.8 + pi, 1.9 + pi},
      shifted_2pi{0.1 + 2 * pi, 0.8 + 2 * pi, 1.9 + 2 * pi};
  const Coupling probe{1.5, 0, 1};

  const auto even = testing_support::random_density(rng, SidebandWindow::symmetric(4, 2));
  EXPECT_LT((simulate_spectrogram(even, probe, base).populations -
             simulate_spectrogram(even, probe, shifted_pi).populations).cwiseAbs().maxCoeff(), 1e-9);

  const auto dense = testing_support::random_density(rng, SidebandWindow::symmetric(3, 1));
  EXPECT_LT((simulate_spectrogram(dense, probe, base).populations -
             simulate_spectrogram(dense, probe, shifted_2pi).populations).cwiseAbs().maxCoeff(), 1e-9);
  // A generic stride-1 state is not pi-periodic.
  EXPECT_GT((simulate_spectrogram(dense, probe, base).populations -
             simulate_spectrogram(dense, probe, shifted_pi).populations).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(Spectrogram, MeanMomentumWithoutCoherencesAtProbeSpacing) {
  // Probing at the fundamental moves mean momentum only through coherences
  // between neighbouring sidebands; even-support states have none.
  std::mt19937_64 rng(12);
  for (int i = 0; i < 20; ++i) {
    const auto rho = testing_support::random_density(rng, SidebandWindow::symmetric(6, 2));
    const double m0 = mean_momentum(rho.populations(), rho.window);
    const auto s = simulate_spectrogram(rho, Coupling{2.16, 0.4, 1}, uniform_theta_grid(9, 0.0, std::numbers::pi));
    for (int j = 0; j < s.columns(); ++j)
      EXPECT_NEAR(mean_momentum(s.populations.col(j), s.window), m0, 1e-8);
  }
}

TEST(Spectrogram, RejectsBadGrid) {
  const auto rho = DensityMatrix::maximally_mixed(SidebandWindow::symmetric(2));
  EXPECT_THROW(simulate_spectrogram(rho, Coupling{1, 0, 1}, std::vector<double>{}), ValidationError);
  EXPECT_THROW(simulate_spectrogram(rho, Coupling{1, 0, 1}, std::vector<double>{0.5, 0.2}), ValidationError);
}

TEST(Noise, DeterministicPerSeed) {
  const auto rho = testing_support::prepared_truth(Coupling{0.63, 0, 2});
  const auto s = simulate_spectrogram(rho, Coupling{2.16, 0, 1}, uniform_theta_grid(24, 0.0, std::numbers::pi));
  const auto a = add_poisson_noise(s, 1e4, 42), b = add_poisson_noise(s, 1e4, 42), c = add_poisson_noise(s, 1e4, 43);
  EXPECT_EQ(a.populations, b.populations);
  EXPECT_NE(a.populations, c.populations);
  for (int j = 0; j < a.columns(); ++j) EXPECT_NEAR(a.populations.col(j).sum(), 1.0, 1e-12);
  EXPECT_EQ(*a.counts_per_spectrum, 1e4);
}

TEST(Noise, IndependentOfThreadCount) {
  const auto rho = testing_support::prepared_truth(Coupling{0.63, 0, 2});
  const auto s = simulate_spectrogram(rho, Coupling{2.16, 0, 1}, uniform_theta_grid(24, 0.0, std::numbers::pi));
  ::setenv("SQUIRRELS_THREADS", "4", 1);
  const RMatrix parallel = add_poisson_noise(s, 1e3, 5).populations;
  ::setenv("SQUIRRELS_THREADS", "1", 1);
  const RMatrix serial = add_poisson_noise(s, 1e3, 5).populations;
  ::unsetenv("SQUIRRELS_THREADS");
  EXPECT_EQ(parallel, serial);
}

TEST(Noise, LargeCountLimit) {
  const auto rho = testing_support::prepared_truth(Coupling{0.63, 0, 2});
  const auto s = simulate_spectrogram(rho, Coupling{2.16, 0, 1}, uniform_theta_grid(24, 0.0, std::numbers::pi));
  const auto n = add_poisson_noise(s, 1e9, 1);
  EXPECT_LE((n.populations - s.populations).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(Noise, SpreadFollowsPoissonStatistics) {
  const auto rho = testing_support::prepared_truth(Coupling{0.63, 0, 2});
  const auto s = simulate_spectrogram(rho, Coupling{2.16, 0, 1}, uniform_theta_grid(24, 0.0, std::numbers::pi));
  const double counts = 1e3;
  RMatrix sq = RMatrix::Zero(s.rows(), s.columns());
  const int seeds = 100;
  for (int k = 0; k < seeds; ++k) sq += (add_poisson_noise(s, counts, 1000 + k).populations - s.populations).cwiseAbs2();
  // Compare the pooled rms perturbation of well-populated bins with sqrt(p/N).
  double got = 0.0, want = 0.0;
  for (int r = 0; r < s.rows(); ++r)
    for (int j = 0; j < s.columns(); ++j)
      if (s.populations(r, j) > 0.02) {
        got += sq(r, j) / seeds;
        want += s.populations(r, j) * (1.0 - s.populations(r, j)) / counts;
      }
  EXPECT_NEAR(std::sqrt(got / want), 1.0, 0.05);
}

TEST(Noise, RejectsNonPositiveCounts) {
  const auto rho = DensityMatrix::maximally_mixed(SidebandWindow::symmetric(1));
  const auto s = simulate_spectrogram(rho, Coupling{0.5, 0, 1}, uniform_theta_grid(3, 0.0, 1.0));
  EXPECT_THROW(add_poisson_noise(s, 0.0, 1), ValidationError);
  EXPECT_THROW(add_poisson_noise(s, -5.0, 1), ValidationError);
}

TEST(Jitter, ZeroSigmaIsPure) {
  const auto rho = phase_jitter_ensemble(Coupling{3.95, 0, 2}, 0.05, 0.0);
  EXPECT_NEAR(rho.purity(), 1.0, 1e-10);
}

TEST(Jitter, PurityDecreasesWithSigma) {
  double last = 2.0;
  for (double sigma : {0.0, 0.1, 0.19, 0.5}) {
    const auto rho = phase_jitter_ensemble(Coupling{3.95, 0, 2}, 0.047, sigma);
    EXPECT_TRUE(rho.invariants().ok()) << sigma;
    EXPECT_LT(rho.purity(), last);
    last = rho.purity();
  }
}

TEST(Jitter, QuadratureIsConverged) {
  const Coupling g{3.95, 0, 1};
  const double p21 = phase_jitter_ensemble(g, 0.047, 0.189, 21).purity();
  const double p41 = phase_jitter_ensemble(g, 0.047, 0.189, 41).purity();
  EXPECT_NEAR(p21, p41, 1e-8);
}

TEST(Jitter, MatchesDirectGaussianAverage) {
  // Coherences of the jittered state carry the characteristic function of
  // the delay distribution: rho_kl = rho_kl(0) exp(-(k - l)^2 sigma^2 / 2).
  const Coupling g{1.2, 0, 1};
  const double sigma = 0.189;
  const auto pure = phase_jitter_ensemble(g, 0.0, 0.0);
  const auto mixed = phase_jitter_ensemble(g, 0.0, sigma);
  for (int k = -5; k <= 5; ++k)
    for (int l = -5; l <= 5; ++l)
      EXPECT_LT(std::abs(mixed.at(k, l) - pure.at(k, l) * std::exp(-0.5 * (k - l) * (k - l) * sigma * sigma)), 1e-10);
}
