#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "phi4mm/error.hpp"
#include "phi4mm/provenance.hpp"
#include "phi4mm/quadrature.hpp"
#include "phi4mm/report.hpp"

namespace phi4mm {

namespace detail {

inline constexpr double kLanczosG = 7.0;
inline constexpr std::array<double, 9> kLanczosCoefficients = {
    0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
    771.32342877765313,   -176.61502916214059,   12.507343278686905,
    -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};

}  // namespace detail

/// Gamma function by the Lanczos approximation (g = 7, 9 terms), with the
/// reflection formula below 1/2.
inline double lanczos_gamma(double x) {
  if (x < 0.5) return M_PI / (std::sin(M_PI * x) * lanczos_gamma(1.0 - x));
  x -= 1.0;
  double a = detail::kLanczosCoefficients[0];
  const double t = x + detail::kLanczosG + 0.5;
  for (std::size_t i = 1; i < detail::kLanczosCoefficients.size(); ++i) a += detail::kLanczosCoefficients[i] / (x + i);
  return std::sqrt(2.0 * M_PI) * std::pow(t, x + 0.5) * std::exp(-t) * a;
}

/// Psi(0) = Gamma(1/4) / (sqrt(2) eta^{1/4}).
inline double weber_a0(double eta) { return lanczos_gamma(0.25) / (M_SQRT2 * std::pow(eta, 0.25)); }

/// Psi'(0) = -sqrt(2) Gamma(3/4) / eta^{1/4}.
inline double weber_a1(double eta) { return -M_SQRT2 * lanczos_gamma(0.75) / std::pow(eta, 0.25); }

/// Power series of y'' = u^2 y: a_{n+4} = a_n / ((n+4)(n+3)), a_2 = a_3 = 0.
struct WeberSeries {
  double a0 = 0.0;
  double a1 = 0.0;
  std::vector<double> coefficients;  // a_0 .. a_M

  std::size_t order() const { return coefficients.empty() ? 0 : coefficients.size() - 1; }

  static WeberSeries with_order(double a0, double a1, std::size_t m) {
    WeberSeries s{a0, a1, std::vector<double>(std::max<std::size_t>(m, 1) + 1, 0.0)};
    s.coefficients[0] = a0;
    s.coefficients[1] = a1;
    for (std::size_t n = 4; n < s.coefficients.size(); ++n)
      s.coefficients[n] = s.coefficients[n - 4] / (static_cast<double>(n) * static_cast<double>(n - 1));
    return s;
  }

  /// Smallest order whose last retained terms fall below rel_tol of the sum on |u| <= radius.
  static WeberSeries adaptive(double a0, double a1, double radius, double rel_tol = 1e-16, std::size_t max_order = 4000);
};

struct SeriesValue {
  double value = 0.0;
  double first = 0.0;
  double second = 0.0;
  double tail_bound = 0.0;
};

/// Value and term-wise derivatives. The tail beyond a_M is bounded by the last
/// nonzero terms of each chain times the geometric factor r/(1 - r),
/// r = u^4 / (M (M+1)).
inline SeriesValue weber_series_terms(const WeberSeries& s, double u) {
  SeriesValue out;
  const std::size_t m = s.order();
  double p = 1.0;  // u^n
  double last_even = 0.0, last_odd = 0.0;
  for (std::size_t n = 0; n <= m; ++n) {
    const double a = s.coefficients[n];
    const double dn = static_cast<double>(n);
    out.value += a * p;
    if (n >= 1) out.first += dn * a * std::pow(u, dn - 1.0);
    if (n >= 2) out.second += dn * (dn - 1.0) * a * std::pow(u, dn - 2.0);
    if (n % 4 == 0) last_even = std::abs(a * p);
    if (n % 4 == 1) last_odd = std::abs(a * p);
    p *= u;
  }
  const double u4 = u * u * u * u;
  const double r = u4 / (static_cast<double>(m) * (static_cast<double>(m) + 1.0));
  out.tail_bound = r < 1.0 ? (last_even + last_odd) * r / (1.0 - r) : std::numeric_limits<double>::infinity();
  return out;
}

inline WeberSeries WeberSeries::adaptive(double a0, double a1, double radius, double rel_tol, std::size_t max_order) {
  for (std::size_t m = 8; m <= max_order; m += 4) {
    auto s = with_order(a0, a1, m + 1);
    const auto v = weber_series_terms(s, radius);
    if (v.tail_bound <= rel_tol * std::max(std::abs(v.value), std::abs(a0) + std::abs(a1) * radius)) return s;
  }
  std::ostringstream os;
  os << "weber series: no truncation up to order " << max_order << " meets " << rel_tol << " at |u| = " << radius;
  throw TruncationInsufficient(os.str());
}

/// sum a_n u^n; throws TruncationInsufficient when the tail bound exceeds
/// tolerance * max(1, |y|).
inline double weber_series_eval(const WeberSeries& s, double u, double tolerance = 1e-12) {
  const auto v = weber_series_terms(s, u);
  if (!(v.tail_bound <= tolerance * std::max(1.0, std::abs(v.value)))) {
    std::ostringstream os;
    os << "weber series: tail bound " << v.tail_bound << " at u = " << u << " with order " << s.order();
    throw TruncationInsufficient(os.str());
  }
  return v.value;
}

/// (y'' - u^2 y) / max(1, |y|) from the term-wise second derivative.
inline double weber_series_residual(const WeberSeries& s, double u) {
  const auto v = weber_series_terms(s, u);
  return (v.second - u * u * v.value) / std::max(1.0, std::abs(v.value));
}

namespace detail {

/// Exponent -u^2/2 - sqrt(eta) u x^2 - (eta/4) x^4 of the N = 1 integrand.
inline double weber_phase(double u, double eta, double x) {
  const double x2 = x * x;
  return -0.5 * u * u - std::sqrt(eta) * u * x2 - 0.25 * eta * x2 * x2;
}

template <class F>
double weber_integral(F&& g) {
  // even integrand: twice the half line
  return 2.0 * integrate_half_line(g, 1e-13, 1e-13).value;
}

inline void require_eta(double eta) {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw DomainError("weber: eta must be finite and > 0");
}

}  // namespace detail

/// Psi(u) = e^{-u^2/2} int dx exp(-sqrt(eta) u x^2 - (eta/4) x^4).
inline double psi_n1_quadrature(double u, double eta) {
  detail::require_eta(eta);
  return detail::weber_integral([&](double x) { return std::exp(detail::weber_phase(u, eta, x)); });
}

/// dPsi/du by differentiating under the integral.
inline double psi_n1_derivative(double u, double eta) {
  detail::require_eta(eta);
  const double se = std::sqrt(eta);
  return detail::weber_integral(
      [&](double x) { return -(u + se * x * x) * std::exp(detail::weber_phase(u, eta, x)); });
}

/// d^2 Psi/du^2 by differentiating under the integral.
inline double psi_n1_second_derivative(double u, double eta) {
  detail::require_eta(eta);
  const double se = std::sqrt(eta);
  return detail::weber_integral([&](double x) {
    const double d = u + se * x * x;
    return (d * d - 1.0) * std::exp(detail::weber_phase(u, eta, x));
  });
}

/// (Psi'' - u^2 Psi) / max(1, |Psi|).
inline double weber_zero_energy_residual(double u, double eta) {
  const double psi = psi_n1_quadrature(u, eta);
  return (psi_n1_second_derivative(u, eta) - u * u * psi) / std::max(1.0, std::abs(psi));
}

namespace detail {

/// I_{+-1/4}(z) by the ascending series.
inline double bessel_i_series(double nu, double z) {
  const double h = 0.5 * z;
  double term = std::pow(h, nu) / lanczos_gamma(nu + 1.0);
  double sum = term;
  for (int k = 1; k < 200; ++k) {
    term *= h * h / (k * (k + nu));
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum)) break;
  }
  return sum;
}

/// K_nu(z) for z >= 2 by Steed's method on Temme's second continued fraction.
inline double bessel_k_cf2(double nu, double z) {
  const double a1 = 0.25 - nu * nu;
  double b = 2.0 * (1.0 + z);
  double d = 1.0 / b;
  double h = d, delh = d;
  double q1 = 0.0, q2 = 1.0;
  double q = a1, c = a1, a = -a1;
  double s = 1.0 + q * delh;
  for (int i = 2; i < 10000; ++i) {
    a -= 2.0 * (i - 1);
    c = -a * c / i;
    const double qnew = (q1 - b * q2) / a;
    q1 = q2;
    q2 = qnew;
    q += c * qnew;
    b += 2.0;
    d = 1.0 / (b + a * d);
    delh = (b * d - 1.0) * delh;
    h += delh;
    const double dels = q * delh;
    s += dels;
    if (std::abs(dels / s) < 1e-17) break;
  }
  return std::sqrt(M_PI / (2.0 * z)) * std::exp(-z) / s;
}

}  // namespace detail

/// Series/continued-fraction crossover for K_{1/4}.
inline constexpr double kBesselCrossover = 2.0;

/// K_{1/4}(z): (pi/2)(I_{-1/4} - I_{1/4})/sin(pi/4) for z < 2, continued fraction above.
inline double bessel_k_quarter(double z) {
  if (!(z > 0.0) || !std::isfinite(z)) throw DomainError("bessel_k_quarter: z must be finite and > 0");
  if (z < kBesselCrossover)
    return 0.5 * M_PI * (detail::bessel_i_series(-0.25, z) - detail::bessel_i_series(0.25, z)) / std::sin(0.25 * M_PI);
  return detail::bessel_k_cf2(0.25, z);
}

/// eta^{-1/4} sqrt(u) K_{1/4}(u^2/2), u > 0.
inline double psi_n1_bessel(double u, double eta) {
  detail::require_eta(eta);
  if (!(u > 0.0)) throw DomainError("psi_n1_bessel: u must be > 0");
  return std::pow(eta, -0.25) * std::sqrt(u) * bessel_k_quarter(0.5 * u * u);
}

struct WeberRow {
  double u = 0.0;
  double eta = 0.0;
  double psi_quad = 0.0;
  double psi_series = 0.0;
  double psi_bessel = 0.0;
  double residual = 0.0;  // weber_zero_energy_residual

  /// Largest pairwise disagreement relative to max(1, |Psi|).
  double disagreement() const {
    const double scale = std::max(1.0, std::abs(psi_quad));
    return std::max({std::abs(psi_quad - psi_series), std::abs(psi_quad - psi_bessel), std::abs(psi_series - psi_bessel)}) /
           scale;
  }
};

inline WeberRow weber_row(double u, double eta) {
  const auto series = WeberSeries::adaptive(weber_a0(eta), weber_a1(eta), std::abs(u));
  return {u, eta, psi_n1_quadrature(u, eta), weber_series_eval(series, u), psi_n1_bessel(u, eta),
          weber_zero_energy_residual(u, eta)};
}

/// Grid u = u_min, ..., u_max in `points` steps for each eta.
inline std::vector<WeberRow> weber_table(const std::vector<double>& etas, double u_min = 0.1, double u_max = 3.0,
                                         std::size_t points = 30) {
  std::vector<WeberRow> rows;
  for (double eta : etas)
    for (std::size_t k = 0; k < points; ++k) {
      const double u = points == 1 ? u_min : u_min + (u_max - u_min) * static_cast<double>(k) / static_cast<double>(points - 1);
      rows.push_back(weber_row(u, eta));
    }
  return rows;
}

inline std::string weber_csv(const std::vector<WeberRow>& rows) {
  std::string out = "u,eta,psi_quad,psi_series,psi_bessel,residual\n";
  for (const auto& r : rows)
    out += detail::format_double(r.u) + "," + detail::format_double(r.eta) + "," + detail::format_double(r.psi_quad) + "," +
           detail::format_double(r.psi_series) + "," + detail::format_double(r.psi_bessel) + "," +
           detail::format_double(r.residual) + "\n";
  return out;
}

inline VerificationReport weber_check(const std::vector<double>& etas, double agreement_tolerance = 1e-8,
                                      double residual_tolerance = 1e-8, std::size_t points = 30) {
  VerificationReport r;
  r.check = "weber";
  r.paper_ref = "N=1 Weber equation: quadrature, series and Bessel K_{1/4} forms";
  r.n = 1;
  const auto rows = weber_table(etas, 0.1, 3.0, points);
  double agree = 0.0, resid = 0.0;
  for (const auto& row : rows) {
    agree = std::max(agree, row.disagreement());
    resid = std::max(resid, std::abs(row.residual));
  }
  const double gamma_reflection = lanczos_gamma(0.25) * lanczos_gamma(0.75) / (M_PI * M_SQRT2) - 1.0;
  r.inputs = {{"etas", etas}, {"u_min", 0.1}, {"u_max", 3.0}, {"points", points}};
  r.add("three_way_agreement", agree, agreement_tolerance);
  r.add("weber_residual", resid, residual_tolerance);
  r.add("gamma_reflection", gamma_reflection, 1e-12);
  r.config_hash = config_hash(r.inputs);
  return r;
}

}  // namespace phi4mm
