#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "phi4mm/error.hpp"
#include "phi4mm/monte_carlo.hpp"
#include "phi4mm/principal_value.hpp"
#include "phi4mm/provenance.hpp"
#include "phi4mm/quadrature.hpp"
#include "phi4mm/spectra.hpp"

namespace phi4mm {

inline constexpr std::size_t kMaxQuadratureN = 4;
inline constexpr std::size_t kMaxMonteCarloN = 6;

enum class Route { MatrixMc, EigenQuadrature, Pfaffian, Free };

inline std::string to_string(Route r) {
  switch (r) {
    case Route::MatrixMc: return "matrix-mc";
    case Route::EigenQuadrature: return "eigen-quadrature";
    case Route::Pfaffian: return "pfaffian";
    case Route::Free: return "free";
  }
  return "unknown";
}

inline Route route_from_string(const std::string& s) {
  if (s == "matrix-mc") return Route::MatrixMc;
  if (s == "eigen-quadrature") return Route::EigenQuadrature;
  if (s == "pfaffian") return Route::Pfaffian;
  if (s == "free") return Route::Free;
  throw ConfigInvalid("unknown route '" + s + "' (expected matrix-mc, eigen-quadrature, pfaffian)");
}

struct PartitionEstimate {
  double value = 0.0;
  double error = 0.0;
  Route route = Route::Free;
  Spectrum spectrum;
  std::uint64_t config_hash = 0;
  std::size_t cost = 0;

  double relative_error() const { return value == 0.0 ? error : error / std::abs(value); }
};

inline void to_json(nlohmann::json& j, const PartitionEstimate& p) {
  j = nlohmann::json{{"route", to_string(p.route)},
                     {"value", p.value},
                     {"log_value", p.value > 0.0 ? std::log(p.value) : std::nan("")},
                     {"error", p.error},
                     {"spectrum", p.spectrum},
                     {"config_hash", p.config_hash},
                     {"cost", p.cost}};
}

/// Quartic potential V(x) = (eta/4) x^4.
inline double potential(double x, double eta) {
  const double x2 = x * x;
  return 0.25 * eta * x2 * x2;
}

/// Free partition function: a product of one-dimensional Gaussian integrals
/// over the N^2 real coordinates of N Tr(E Phi^2).
inline double z_free(const Spectrum& s) {
  const double n = static_cast<double>(s.n());
  double log_z = 0.0;
  for (std::size_t i = 0; i < s.n(); ++i) {
    log_z += 0.5 * std::log(M_PI / (n * s.energy(i)));
    for (std::size_t j = i + 1; j < s.n(); ++j) log_z += std::log(M_PI / (n * (s.energy(i) + s.energy(j))));
  }
  return std::exp(log_z);
}

/// Z_f(E) exp(-N (eta/4) Tr Phi^4) for the free-proposal deviates z; its mean
/// over standard normal z is Z(E, eta). Reusing z across spectra gives
/// common random numbers.
inline double matrix_mc_sample(const Spectrum& s, const HermitianGaussianProposal& proposal,
                               std::span<const double> z) {
  const double zf = z_free(s);
  if (s.eta() == 0.0) return zf;
  const Eigen::MatrixXcd phi = proposal.map(z).matrix();
  const Eigen::MatrixXcd phi2 = phi * phi;
  const double tr4 = phi2.squaredNorm();
  return zf * std::exp(-static_cast<double>(s.n()) * 0.25 * s.eta() * tr4);
}

inline PartitionEstimate z_matrix_mc(const Spectrum& s, const McConfig& config, unsigned workers = 1) {
  if (s.n() > kMaxMonteCarloN) throw DomainError("z_matrix_mc: N must be <= 6");
  const auto proposal = HermitianGaussianProposal::for_spectrum(s);
  auto draw = [&s, &proposal, z = std::vector<double>(proposal.dimension())](NormalStream& stream) mutable {
    stream.fill(z);
    return matrix_mc_sample(s, proposal, z);
  };
  const auto e = mc_estimate(config, draw, "matrix-mc", workers);
  return {e.value, e.error, Route::MatrixMc, s, e.config_hash, e.cost};
}

/// Default nodes per axis for the k-dimensional chamber rule.
inline std::size_t default_nodes(std::size_t k) {
  switch (k) {
    case 1: return 64;
    case 2: return 48;
    case 3: return 32;
    default: return 20;
  }
}

/// Grid with truncation exp(-N E_min L^2) < 1e-16 for this spectrum.
inline QuadGrid grid_for_spectrum(const Spectrum& s, std::size_t nodes = 0, double pv_epsilon = 1e-3,
                                  double tolerance = 1e-4) {
  return QuadGrid::make(nodes ? nodes : default_nodes(s.n()), QuadGrid::truncation_for(s.n(), s.min_energy()),
                        pv_epsilon, tolerance);
}

/// Constant relating the eigenvalue integral to the matrix integral,
/// (-pi/N)^{N(N-1)/2}.
inline double eigen_route_constant(std::size_t n) {
  const double p = static_cast<double>(n * (n - 1) / 2);
  const double mag = std::pow(M_PI / static_cast<double>(n), p);
  return (n * (n - 1) / 2) % 2 ? -mag : mag;
}

namespace detail {

/// prod_{l<k} (x_k - x_l)/(x_k + x_l), accumulated as log-magnitude and sign.
inline double cauchy_kernel(std::span<const double> x) {
  double log_mag = 0.0;
  bool negative = false;
  for (std::size_t l = 0; l < x.size(); ++l)
    for (std::size_t k = l + 1; k < x.size(); ++k) {
      const double num = x[k] - x[l], den = x[k] + x[l];
      if (num == 0.0) return 0.0;
      log_mag += std::log(std::abs(num)) - std::log(std::abs(den));
      if ((num < 0.0) != (den < 0.0)) negative = !negative;
    }
  const double mag = std::exp(log_mag);
  return negative ? -mag : mag;
}

inline double eigen_weight(const Spectrum& s, std::span<const double> x) {
  const double n = static_cast<double>(s.n());
  double f = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) f += potential(x[i], s.eta()) + s.energy(i) * x[i] * x[i];
  return std::exp(-n * f);
}

inline void require_quadrature_size(const Spectrum& s, std::size_t cap, const char* who) {
  if (s.n() > cap) {
    std::ostringstream os;
    os << who << ": N = " << s.n() << " exceeds the quadrature cap " << cap;
    throw DomainError(os.str());
  }
}

}  // namespace detail

/// Z from the N-dimensional eigenvalue integral
/// K_N / Delta(E) PV int prod dx e^{-N sum (V(x_i) + E_i x_i^2)} prod_{l<k} (x_k - x_l)/(x_k + x_l).
inline PartitionEstimate z_eigen_quadrature(const Spectrum& s, const QuadGrid& grid) {
  detail::require_quadrature_size(s, kMaxQuadratureN, "z_eigen_quadrature");
  auto integrand = [&](std::span<const double> x) { return detail::eigen_weight(s, x) * detail::cauchy_kernel(x); };
  const auto e = pv_integral(integrand, s.n(), grid);
  const double c = eigen_route_constant(s.n()) / vandermonde(s);
  return {c * e.value, std::abs(c) * e.error, Route::EigenQuadrature, s, e.config_hash, e.cost};
}

inline PartitionEstimate z_eigen_quadrature(const Spectrum& s) { return z_eigen_quadrature(s, grid_for_spectrum(s)); }

/// Skew-symmetric matrix of pair integrals
/// M_ij = PV int dx dy e^{-N(V(x) + E_i x^2)} e^{-N(V(y) + E_j y^2)} (x - y)/(x + y).
struct MomentMatrix {
  Eigen::MatrixXd values;
  Eigen::MatrixXd errors;
  std::size_t cost = 0;
  std::uint64_t config_hash = 0;

  static MomentMatrix build(const Spectrum& s, const QuadGrid& grid) {
    const auto n = static_cast<Eigen::Index>(s.n());
    MomentMatrix m;
    m.values = Eigen::MatrixXd::Zero(n, n);
    m.errors = Eigen::MatrixXd::Zero(n, n);
    const double nn = static_cast<double>(s.n());
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double ei = s.energy(static_cast<std::size_t>(i)), ej = s.energy(static_cast<std::size_t>(j));
        auto f = [&](std::span<const double> x) {
          const double w = std::exp(-nn * (potential(x[0], s.eta()) + ei * x[0] * x[0] + potential(x[1], s.eta()) +
                                           ej * x[1] * x[1]));
          return w * (x[0] - x[1]) / (x[0] + x[1]);
        };
        const auto e = pv_integral(f, 2, grid);
        m.values(i, j) = e.value;
        m.values(j, i) = -e.value;
        m.errors(i, j) = m.errors(j, i) = e.error;
        m.cost += e.cost;
        m.config_hash = e.config_hash;
      }
    return m;
  }
};

namespace detail {

inline void require_skew(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw NotSkewSymmetric("pfaffian: matrix is not square");
  if (m.size() == 0) return;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m + m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw NotSkewSymmetric("pfaffian: M + M^T is not zero");
}

}  // namespace detail

/// Pfaffian by skew-symmetric Gaussian elimination with partial pivoting.
/// Odd dimension gives 0.
inline double pfaffian(const Eigen::MatrixXd& m) {
  detail::require_skew(m);
  const Eigen::Index n = m.rows();
  if (n == 0) return 1.0;
  if (n % 2 == 1) return 0.0;
  Eigen::MatrixXd a = m;
  double pf = 1.0;
  for (Eigen::Index k = 0; k + 1 < n; k += 2) {
    Eigen::Index kp;
    a.col(k).tail(n - k - 1).cwiseAbs().maxCoeff(&kp);
    kp += k + 1;
    if (kp != k + 1) {
      a.row(k + 1).swap(a.row(kp));
      a.col(k + 1).swap(a.col(kp));
      pf = -pf;
    }
    if (a(k + 1, k) == 0.0) return 0.0;
    pf *= a(k, k + 1);
    if (k + 2 < n) {
      const Eigen::Index r = n - k - 2;
      const Eigen::VectorXd tau = a.row(k).tail(r).transpose() / a(k, k + 1);
      const Eigen::VectorXd col = a.col(k + 1).tail(r);
      a.bottomRightCorner(r, r) += tau * col.transpose() - col * tau.transpose();
    }
  }
  return pf;
}

/// Z = (pi/N)^{N(N-1)/2} / Delta(E) pf(M) for even N.
inline PartitionEstimate z_pfaffian(const Spectrum& s, const QuadGrid& grid) {
  if (s.n() % 2 != 0) throw OddDimension("z_pfaffian: N must be even");
  const auto m = MomentMatrix::build(s, grid);
  const double pf = pfaffian(m.values);
  // first-order propagation: d pf / d M_ij = (-1)^{i+j+1} pf(M without rows/cols i, j)
  const auto n = m.values.rows();
  double err = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      Eigen::MatrixXd minor(n - 2, n - 2);
      for (Eigen::Index r = 0, rr = 0; r < n; ++r) {
        if (r == i || r == j) continue;
        for (Eigen::Index c = 0, cc = 0; c < n; ++c) {
          if (c == i || c == j) continue;
          minor(rr, cc++) = m.values(r, c);
        }
        ++rr;
      }
      err += std::abs(pfaffian(minor)) * m.errors(i, j);
    }
  const double c = std::pow(M_PI / static_cast<double>(s.n()), static_cast<double>(s.n() * (s.n() - 1) / 2)) /
                   vandermonde(s);
  return {c * pf, std::abs(c) * err, Route::Pfaffian, s, m.config_hash, m.cost};
}

inline PartitionEstimate z_pfaffian(const Spectrum& s) { return z_pfaffian(s, grid_for_spectrum(s, 48)); }

/// Psi(E, eta) = exp(-(N / 2 eta) sum E_i^2) Delta(E) Z(E, eta).
inline double psi_from_z(const Spectrum& s, double z) {
  if (!(s.eta() > 0.0)) throw DomainError("psi: requires eta > 0");
  return std::exp(-static_cast<double>(s.n()) / (2.0 * s.eta()) * s.sum_of_squares()) * vandermonde(s) * z;
}

/// Ratio of the eigenvalue integral with the bracket sum_j (eta N x_j^4 + 2 N E_j x_j^2 - 1)
/// inserted to the same integral without it; zero when the identity holds.
inline Estimate lemma42_residual(const Spectrum& s, const QuadGrid& grid) {
  detail::require_quadrature_size(s, 3, "lemma42_residual");
  const double n = static_cast<double>(s.n());
  auto base = [&](std::span<const double> x) { return detail::eigen_weight(s, x) * detail::cauchy_kernel(x); };
  auto bracketed = [&](std::span<const double> x) {
    double b = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double x2 = x[j] * x[j];
      b += s.eta() * n * x2 * x2 + 2.0 * n * s.energy(j) * x2 - 1.0;
    }
    return base(x) * b;
  };
  const auto num = pv_integral(bracketed, s.n(), grid);
  const auto den = pv_integral(base, s.n(), grid);
  Estimate e;
  e.value = num.value / den.value;
  e.error = (num.error + std::abs(e.value) * den.error) / std::abs(den.value);
  e.kind = ErrorKind::Bound;
  e.method = "lemma42-pv";
  e.cost = num.cost + den.cost;
  e.config_hash = num.config_hash;
  return e;
}

inline Estimate lemma42_residual(const Spectrum& s) { return lemma42_residual(s, grid_for_spectrum(s)); }

}  // namespace phi4mm
