#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "phi4mm/monte_carlo.hpp"
#include "phi4mm/principal_value.hpp"
#include "phi4mm/quadrature.hpp"

using namespace phi4mm;

namespace {

// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
  }
  return d;
}

double ks_critical_1pct(std::size_t n, std::size_t m) { return 1.628 * std::sqrt(double(n + m) / double(n * m)); }

}  // namespace

TEST(GaussLegendre, ExactForPolynomials) {
  for (std::size_t n : {1u, 2u, 5u, 16u, 48u}) {
    const auto r = gauss_legendre(n);
    for (std::size_t deg = 0; deg < 2 * n; ++deg) {
      double s = 0.0;
      for (std::size_t q = 0; q < n; ++q) s += r.weights[q] * std::pow(r.nodes[q], double(deg));
      const double exact = deg % 2 ? 0.0 : 2.0 / (deg + 1.0);
      EXPECT_NEAR(s, exact, 1e-13) << "n=" << n << " deg=" << deg;
    }
    for (std::size_t q = 1; q < n; ++q) EXPECT_LT(r.nodes[q - 1], r.nodes[q]);
  }
}

TEST(QuadGrid, ValidatesInvariants) {
  EXPECT_NO_THROW(QuadGrid::make(32, 5.0));
  EXPECT_THROW(QuadGrid::make(32, -1.0), ConfigInvalid);
  EXPECT_THROW(QuadGrid::make(32, 1.0, 2.0), ConfigInvalid);
  const double L = QuadGrid::truncation_for(2, 1.0);
  EXPECT_LT(std::exp(-2.0 * 1.0 * L * L), 1.0001e-16);
}

TEST(Adaptive, HalfLineGaussian) {
  const auto r = integrate_half_line([](double x) { return std::exp(-x * x); }, 1e-13, 1e-13);
  EXPECT_NEAR(r.value, std::sqrt(M_PI) / 2, 1e-12);
  const auto s = integrate_adaptive([](double x) { return std::sqrt(x); }, 0.0, 1.0, 1e-11, 1e-11);
  EXPECT_NEAR(s.value, 2.0 / 3.0, 1e-10);
}

TEST(MonteCarlo, OneDimensionalGaussianByReweighting) {
  const McConfig cfg{1, 100000, 10, true};
  const HermitianGaussianProposal proposal(1, 1.0);
  std::vector<double> z(1);
  const auto e = mc_estimate(
      cfg,
      [&](NormalStream& s) {
        s.fill(z);
        const double x = proposal.map(z).diag[0];
        return std::exp(-x * x - proposal.log_density(z));
      },
      "test");
  EXPECT_NEAR(e.value, std::sqrt(M_PI), 3 * e.error);
  EXPECT_GT(e.error, 0.0);
}

TEST(MonteCarlo, TwoByTwoGaussianMatchesProductOfOneDimensional) {
  const McConfig cfg{2, 100000, 10, true};
  const HermitianGaussianProposal proposal(2, 0.6);
  std::vector<double> z(4);
  const auto e = mc_estimate(
      cfg,
      [&](NormalStream& s) {
        s.fill(z);
        const auto m = proposal.map(z).matrix();
        const double tr2 = (m * m).trace().real();
        return std::exp(-tr2 - proposal.log_density(z));
      },
      "test");
  // diagonal: sqrt(pi)^2, off-diagonal weight e^{-2(re^2 + im^2)}: sqrt(pi/2)^2
  const double exact = M_PI * M_PI / 2;
  EXPECT_NEAR(e.value, exact, 3 * e.error);
}

TEST(MonteCarlo, DeterministicAndWorkerIndependent) {
  const McConfig cfg{42, 20000, 7, true};
  const auto a = sample_hermitian_gaussian(3, cfg);
  const auto b = sample_hermitian_gaussian(3, cfg);
  EXPECT_EQ(a.front().point.diag, b.front().point.diag);
  EXPECT_EQ(a.back().point.offdiag_im, b.back().point.offdiag_im);
  auto draw = [](NormalStream& s) { return std::exp(s.next()); };
  const auto e1 = mc_estimate(cfg, draw, "x", 1);
  const auto e3 = mc_estimate(cfg, draw, "x", 3);
  EXPECT_EQ(e1.value, e3.value);
  EXPECT_EQ(e1.error, e3.error);
  EXPECT_EQ(e1.config_hash, e3.config_hash);
  EXPECT_NE(e1.config_hash, mc_estimate(cfg.with_seed(43), draw, "x").config_hash);
}

TEST(MonteCarlo, BatchMergeIsOrderIndependent) {
  std::vector<BatchStats> batches(6);
  std::mt19937_64 rng(9);
  std::lognormal_distribution<double> g;
  for (std::size_t b = 0; b < batches.size(); ++b) {
    batches[b].index = b;
    for (int k = 0; k < 1000; ++k) batches[b].add(g(rng));
  }
  const auto ref = mean_and_stderr(merge_batches(batches));
  for (int trial = 0; trial < 10; ++trial) {
    std::shuffle(batches.begin(), batches.end(), rng);
    const auto got = mean_and_stderr(merge_batches(batches));
    EXPECT_EQ(got.first, ref.first);
    EXPECT_EQ(got.second, ref.second);
  }
}

TEST(Haar, UnitaryAndUnitModulus) {
  const McConfig cfg{5, 200, 2, true};
  for (const auto& u : sample_haar_unitary(1, cfg)) EXPECT_NEAR(std::abs(u(0, 0)), 1.0, 1e-14);
  for (std::size_t n : {2u, 3u, 5u})
    for (const auto& u : sample_haar_unitary(n, cfg))
      EXPECT_LT((u * u.adjoint() - Eigen::MatrixXcd::Identity(n, n)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Haar, FirstMoments) {
  const McConfig cfg{6, 100000, 10, true};
  const auto e_re = mc_estimate(cfg, [](NormalStream& s) { return haar_unitary(s, 2)(0, 0).real(); }, "re");
  const auto e_im = mc_estimate(cfg, [](NormalStream& s) { return haar_unitary(s, 2)(0, 0).imag(); }, "im");
  const auto e_abs = mc_estimate(cfg, [](NormalStream& s) { return std::norm(haar_unitary(s, 2)(0, 0)); }, "abs");
  EXPECT_NEAR(e_re.value, 0.0, 3 * e_re.error);
  EXPECT_NEAR(e_im.value, 0.0, 3 * e_im.error);
  EXPECT_NEAR(e_abs.value, 0.5, 3 * e_abs.error);
}

TEST(Haar, LeftInvarianceKolmogorovSmirnov) {
  const std::size_t n = 3;
  const auto us = sample_haar_unitary(n, McConfig{7, 10000, 4, true});
  const auto vs = sample_haar_unitary(n, McConfig{8, 1, 1, true});
  const Eigen::MatrixXcd v = vs.front();
  std::vector<double> a, b;
  for (const auto& u : us) {
    a.push_back(std::norm(u(0, 0)));
    b.push_back(std::norm((v * u)(0, 0)));
  }
  EXPECT_LT(ks_statistic(a, b), ks_critical_1pct(a.size(), b.size()));
  // |U_11|^2 ~ Beta(1, n-1): one-sample check against CDF 1 - (1 - x)^{n-1}
  std::sort(a.begin(), a.end());
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double cdf = 1.0 - std::pow(1.0 - a[i], double(n - 1));
    d = std::max({d, std::abs(cdf - double(i) / a.size()), std::abs(cdf - double(i + 1) / a.size())});
  }
  EXPECT_LT(d, 1.628 / std::sqrt(double(a.size())));
}

TEST(PrincipalValue, AntisymmetricKernelGivesZero) {
  auto f = [](std::span<const double> x) { return (x[0] - x[1]) / (x[0] + x[1]) * std::exp(-x[0] * x[0] - x[1] * x[1]); };
  const auto e = pv_integral(f, 2, QuadGrid::make(48, 6.0));
  EXPECT_NEAR(e.value, 0.0, 1e-12);
}

TEST(PrincipalValue, OddOneDimensionalPole) {
  auto f = [](std::span<const double> x) { return std::exp(-x[0] * x[0]) / x[0]; };
  const auto e = pv_integral(f, 1, QuadGrid::make(48, 6.0));
  EXPECT_NEAR(e.value, 0.0, 1e-14);
}

TEST(PrincipalValue, MatchesPolarCoordinateOracle) {
  auto f = [](std::span<const double> x) {
    return (x[0] - x[1]) / (x[0] + x[1]) * std::exp(-x[0] * x[0] - 2 * x[1] * x[1]);
  };
  const auto e = pv_integral(f, 2, QuadGrid::make(48, 6.5));
  // Polar form: radial integral done exactly, angular PV around theta = 3pi/4
  // (and its copy at 7pi/4) by pairing theta = 3pi/4 +- t.
  auto h = [](double theta) {
    const double c = std::cos(theta), s = std::sin(theta);
    return (c - s) / (c + s) / (2.0 * (c * c + 2.0 * s * s));
  };
  const double pole = 3.0 * M_PI / 4.0;
  const auto polar = integrate_adaptive([&](double t) { return h(pole + t) + h(pole - t); }, 0.0, M_PI / 2, 1e-13,
                                        1e-13);
  const double oracle = 2.0 * polar.value;
  EXPECT_NEAR(e.value, oracle, 1e-4 * std::abs(oracle));
  EXPECT_NEAR(oracle, M_PI / (3.0 * std::sqrt(2.0)), 1e-10);
  EXPECT_LT(e.error, 1e-6);
}

TEST(PrincipalValue, ReproducesOrdinaryQuadratureWithoutPoles) {
  const double L = 6.5;
  const auto rule = gauss_legendre(96);
  auto f2 = [](std::span<const double> x) {
    return (1.0 + x[0] * x[0] + x[0] * x[1] + std::pow(x[1], 4)) * std::exp(-x[0] * x[0] - 2 * x[1] * x[1]);
  };
  double ordinary = 0.0;
  for (std::size_t p = 0; p < rule.size(); ++p)
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const std::array<double, 2> x{L * rule.nodes[p], L * rule.nodes[q]};
      ordinary += L * L * rule.weights[p] * rule.weights[q] * f2(x);
    }
  // pairing alone (no windows) and the windowed default, whose
  // extrapolation leaves an O(eps^3) remainder
  const auto e2 = pv_integral(f2, 2, QuadGrid::make(48, L, 0.0));
  EXPECT_NEAR(e2.value, ordinary, 1e-10 * std::abs(ordinary));
  const auto w2 = pv_integral(f2, 2, QuadGrid::make(48, L));
  EXPECT_NEAR(w2.value, ordinary, 1e-8 * std::abs(ordinary));

  auto f3 = [](std::span<const double> x) {
    return (1.0 + x[0] * x[1] * x[2] + x[2] * x[2]) * std::exp(-x[0] * x[0] - 1.5 * x[1] * x[1] - 2 * x[2] * x[2]);
  };
  const double exact3 = std::sqrt(M_PI) * std::sqrt(M_PI / 1.5) * std::sqrt(M_PI / 2) * (1.0 + 0.25);
  const auto e3 = pv_integral(f3, 3, QuadGrid::make(32, L, 0.0));
  EXPECT_NEAR(e3.value, exact3, 1e-10 * exact3);
  const auto w3 = pv_integral(f3, 3, QuadGrid::make(32, L));
  EXPECT_NEAR(w3.value, exact3, 1e-8 * exact3);
  EXPECT_GE(w3.error, std::abs(w3.value - exact3));
}

TEST(PrincipalValue, ReproducibleEstimate) {
  auto f = [](std::span<const double> x) {
    return (x[0] - x[1]) / (x[0] + x[1]) * std::exp(-x[0] * x[0] - 3 * x[1] * x[1]);
  };
  const auto a = pv_integral(f, 2, QuadGrid::make(40, 6.0));
  const auto b = pv_integral(f, 2, QuadGrid::make(40, 6.0));
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.error, b.error);
  EXPECT_EQ(a.config_hash, b.config_hash);
}

TEST(PrincipalValue, WideWindowFailsExtrapolation) {
  auto f = [](std::span<const double> x) {
    return (x[0] - x[1]) / (x[0] + x[1]) * std::exp(-x[0] * x[0] - 2 * x[1] * x[1]);
  };
  EXPECT_THROW(pv_integral(f, 2, QuadGrid::make(32, 6.0, 0.8, 1e-6)), NonConvergent);
}
