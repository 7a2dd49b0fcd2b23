#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "phi4mm/spectra.hpp"

using namespace phi4mm;

namespace {

Eigen::MatrixXcd random_hermitian(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> g;
  Eigen::MatrixXcd h(n, n);
  for (int k = 0; k < n; ++k) {
    h(k, k) = g(rng);
    for (int l = k + 1; l < n; ++l) {
      h(k, l) = {g(rng), g(rng)};
      h(l, k) = std::conj(h(k, l));
    }
  }
  return h;
}

double power_sum(std::span<const double> e, int k) {
  double s = 0.0;
  for (double x : e) s += std::pow(x, k);
  return s;
}

}  // namespace

TEST(Spectrum, RejectsInvalidInput) {
  EXPECT_THROW(Spectrum({}, 1.0), InvalidSpectrum);
  EXPECT_THROW(Spectrum({1.0, -2.0}, 1.0), InvalidSpectrum);
  EXPECT_THROW(Spectrum({1.0, 1.0}, 1.0), InvalidSpectrum);
  EXPECT_THROW(Spectrum({1.0, 2.0}, -0.5), InvalidSpectrum);
  EXPECT_THROW(Spectrum({1.0, 1.0 + 1e-9}, 1.0), InvalidSpectrum);
  EXPECT_NO_THROW(Spectrum({1.0, 1.0 + 1e-5}, 1.0));
}

TEST(Spectrum, DiagnosticNamesInvariant) {
  try {
    Spectrum({1.0, 0.0}, 1.0);
    FAIL();
  } catch (const InvalidSpectrum& e) {
    EXPECT_NE(std::string(e.what()).find("strictly positive"), std::string::npos);
  }
}

TEST(Spectrum, KeepsUserOrder) {
  Spectrum s({3.0, 1.0, 2.0}, 0.5);
  EXPECT_EQ(s.energy(0), 3.0);
  EXPECT_EQ(s.energy(2), 2.0);
  EXPECT_DOUBLE_EQ(s.min_gap(), 1.0);
}

TEST(Spectrum, JsonRoundTrip) {
  Spectrum s({1.0, 2.5}, 0.25);
  const nlohmann::json j = s;
  EXPECT_EQ(j.at("n").get<int>(), 2);
  EXPECT_EQ(spectrum_from_json(j), s);
  EXPECT_THROW(spectrum_from_json(nlohmann::json::parse(R"({"energies":[1,2],"eta":1,"n":3})")), InvalidSpectrum);
  EXPECT_THROW(spectrum_from_json(nlohmann::json::parse(R"({"energies":[1,2]})")), InvalidSpectrum);
}

TEST(Vandermonde, Examples) {
  EXPECT_DOUBLE_EQ(vandermonde(std::vector<double>{1, 2, 4}), 6.0);
  EXPECT_DOUBLE_EQ(vandermonde(std::vector<double>{5}), 1.0);
  EXPECT_DOUBLE_EQ(vandermonde(std::vector<double>{2, 1}), -1.0);
  EXPECT_DOUBLE_EQ(vandermonde(std::vector<double>{2, 2}), 0.0);
}

TEST(Vandermonde, TranspositionFlipsSignExactly) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.1, 5.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> e(2 + trial % 5);
    for (double& x : e) x = u(rng);
    Spectrum s(e, 1.0);
    const double v = vandermonde(s);
    for (std::size_t i = 0; i < e.size(); ++i)
      for (std::size_t j = i + 1; j < e.size(); ++j) EXPECT_EQ(vandermonde(s.swapped(i, j)), -v);
  }
}

TEST(CharPoly, MonicAndVanishesAtRoots) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int n = 1; n <= 8; ++n) {
    std::vector<double> r(n);
    for (double& x : r) x = u(rng);
    const auto p = CharPoly::from_roots(r);
    EXPECT_EQ(p.degree(), static_cast<std::size_t>(n));
    EXPECT_EQ(p.coefficients().back(), 1.0);
    for (double x : r) EXPECT_LE(std::abs(p(x)), 1e-10 * p.coefficient_scale());
    for (int j = 0; j < n; ++j)
      EXPECT_NEAR(p.derivative(r[j]), p.derivative_at_root(j), 1e-9 * p.coefficient_scale());
  }
}

TEST(EigenDerivative, DiagonalExamples) {
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(2, 2);
  h(0, 0) = 1.0;
  h(1, 1) = 3.0;
  EXPECT_NEAR(std::abs(eigen_derivative(h, 0, 0, 0) - 1.0), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(eigen_derivative(h, 0, 0, 1)), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(eigen_derivative(h, 1, 1, 1) - 1.0), 0.0, 1e-14);
}

TEST(EigenDerivative, RejectsDegenerate) {
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Identity(2, 2);
  EXPECT_THROW(eigen_derivative(h, 0, 0, 0), DegenerateSpectrum);
}

TEST(EigenDerivative, MatchesCentralDifferences) {
  std::mt19937_64 rng(3);
  const double d = 1e-5;
  for (int trial = 0; trial < 10; ++trial) {
    const auto h = random_hermitian(rng, 3);
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        for (int i = 0; i < 3; ++i) {
          const auto exact = eigen_derivative(h, j, k, i);
          auto shifted = [&](std::complex<double> dir, double s) {
            Eigen::MatrixXcd m = h;
            m(k, i) += s * dir;
            if (k != i) m(i, k) += s * std::conj(dir);
            return hermitian_eigenvalues(m)[j];
          };
          if (k == i) {
            const double fd = (shifted(1.0, d) - shifted(1.0, -d)) / (2 * d);
            EXPECT_NEAR(exact.real(), fd, 1e-6 * std::max(1.0, std::abs(fd)));
            EXPECT_NEAR(exact.imag(), 0.0, 1e-10);
          } else {
            // Wirtinger: (d_Re - i d_Im)/2 of the Hermitian perturbation
            const double dre = (shifted({1, 0}, d) - shifted({1, 0}, -d)) / (2 * d);
            const double dim = (shifted({0, 1}, d) - shifted({0, 1}, -d)) / (2 * d);
            const std::complex<double> fd(0.5 * dre, -0.5 * dim);
            EXPECT_NEAR(std::abs(exact - fd), 0.0, 1e-6 * std::max(1.0, std::abs(fd)));
          }
        }
  }
}

TEST(EigenDerivative, TraceRule) {
  std::mt19937_64 rng(5);
  for (int n = 2; n <= 5; ++n) {
    const auto h = random_hermitian(rng, n);
    for (int i = 0; i < n; ++i) {
      std::complex<double> s = 0.0;
      for (int j = 0; j < n; ++j) s += eigen_derivative(h, j, i, i);
      EXPECT_NEAR(s.real(), 1.0, 1e-10);
      EXPECT_NEAR(s.imag(), 0.0, 1e-10);
    }
  }
}

TEST(Laplacian, TraceSquaredGivesTwoNSquared) {
  std::mt19937_64 rng(13);
  const auto h = random_hermitian(rng, 3);
  const SymmetricFunction tr2 = [](std::span<const double> e) { return power_sum(e, 2); };
  EXPECT_NEAR(matrix_laplacian_on_symmetric(tr2, h), 18.0, 1e-6);
  EXPECT_NEAR(entry_space_laplacian(tr2, h), 18.0, 1e-4 * 18.0);
}

TEST(Laplacian, ConstantAndLinear) {
  std::mt19937_64 rng(17);
  const auto h = random_hermitian(rng, 3);
  const SymmetricFunction one = [](std::span<const double>) { return 1.0; };
  const SymmetricFunction tr = [](std::span<const double> e) { return power_sum(e, 1); };
  EXPECT_NEAR(matrix_laplacian_on_symmetric(one, h), 0.0, 1e-8);
  EXPECT_NEAR(matrix_laplacian_on_symmetric(tr, h), 0.0, 1e-6);
  EXPECT_NEAR(entry_space_laplacian(tr, h), 0.0, 1e-4);
}

TEST(Laplacian, RewriteHoldsOnRandomSymmetricPolynomials) {
  std::mt19937_64 rng(19);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 12; ++trial) {
    const int n = 2 + trial % 2;
    const auto h = random_hermitian(rng, n);
    const std::array<double, 7> c{g(rng), g(rng), g(rng), g(rng), g(rng), g(rng), g(rng)};
    const SymmetricFunction f = [c](std::span<const double> e) {
      const double p1 = power_sum(e, 1), p2 = power_sum(e, 2), p3 = power_sum(e, 3), p4 = power_sum(e, 4);
      return c[0] * p1 + c[1] * p2 + c[2] * p1 * p1 + c[3] * p3 + c[4] * p4 + c[5] * p2 * p2 / 4 + c[6] * p1 * p3;
    };
    const double eig = matrix_laplacian_on_symmetric(f, h);
    const double entry = entry_space_laplacian(f, h, 1e-4);
    EXPECT_NEAR(eig, entry, 1e-4 * std::max(1.0, std::abs(entry))) << "trial " << trial;
  }
}
