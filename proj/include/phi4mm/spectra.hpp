#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "phi4mm/error.hpp"

namespace phi4mm {

/// Minimum admissible spacing between energies, relative to max |E_i|.
inline constexpr double kDefaultRelativeGap = 1e-6;

/// External eigenvalues E_1..E_N (kept in the order given) plus the quartic
/// coupling eta.
///
/// Energies must be strictly positive and pairwise separated by more than
/// relative_gap * max|E_i|. eta = 0 is accepted so the free theory can be
/// represented; anything that divides by eta checks for it separately.
class Spectrum {
 public:
  Spectrum(std::vector<double> energies, double eta, double relative_gap = kDefaultRelativeGap)
      : energies_(std::move(energies)), eta_(eta), relative_gap_(relative_gap) {
    validate();
  }

  std::span<const double> energies() const { return energies_; }
  const std::vector<double>& energy_vector() const { return energies_; }
  double energy(std::size_t i) const { return energies_.at(i); }
  double eta() const { return eta_; }
  std::size_t n() const { return energies_.size(); }
  double relative_gap() const { return relative_gap_; }

  double max_energy() const { return *std::max_element(energies_.begin(), energies_.end()); }
  double min_energy() const { return *std::min_element(energies_.begin(), energies_.end()); }

  /// Smallest |E_i - E_j| over i != j; +inf for N = 1.
  double min_gap() const {
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n(); ++i)
      for (std::size_t j = i + 1; j < n(); ++j) gap = std::min(gap, std::abs(energies_[i] - energies_[j]));
    return gap;
  }

  /// Distance from E_i to its nearest neighbour; +inf for N = 1.
  double gap_at(std::size_t i) const {
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n(); ++j)
      if (j != i) gap = std::min(gap, std::abs(energies_[i] - energies_[j]));
    return gap;
  }

  double sum_of_squares() const {
    return std::transform_reduce(energies_.begin(), energies_.end(), 0.0, std::plus<>{}, [](double e) { return e * e; });
  }

  Spectrum with_energies(std::vector<double> energies) const { return Spectrum(std::move(energies), eta_, relative_gap_); }
  Spectrum with_eta(double eta) const { return Spectrum(energies_, eta, relative_gap_); }

  Spectrum scaled(double lambda) const {
    auto e = energies_;
    for (double& x : e) x *= lambda;
    return Spectrum(std::move(e), eta_, relative_gap_);
  }

  Spectrum swapped(std::size_t i, std::size_t j) const {
    auto e = energies_;
    std::swap(e.at(i), e.at(j));
    return Spectrum(std::move(e), eta_, relative_gap_);
  }

  friend bool operator==(const Spectrum& a, const Spectrum& b) {
    return a.energies_ == b.energies_ && a.eta_ == b.eta_;
  }

 private:
  void validate() const {
    if (energies_.empty()) throw InvalidSpectrum("spectrum: n must be >= 1");
    if (!(eta_ >= 0.0) || !std::isfinite(eta_)) throw InvalidSpectrum("spectrum: coupling eta must be finite and >= 0");
    for (std::size_t i = 0; i < energies_.size(); ++i) {
      if (!(energies_[i] > 0.0) || !std::isfinite(energies_[i])) {
        std::ostringstream os;
        os << "spectrum: energy E[" << i << "] = " << energies_[i] << " is not strictly positive";
        throw InvalidSpectrum(os.str());
      }
    }
    const double threshold = relative_gap_ * max_energy();
    for (std::size_t i = 0; i < energies_.size(); ++i) {
      for (std::size_t j = i + 1; j < energies_.size(); ++j) {
        if (std::abs(energies_[i] - energies_[j]) <= threshold) {
          std::ostringstream os;
          os << "spectrum: energies E[" << i << "] and E[" << j << "] are not distinct (gap "
             << std::abs(energies_[i] - energies_[j]) << " <= " << threshold << ")";
          throw InvalidSpectrum(os.str());
        }
      }
    }
  }

  std::vector<double> energies_;
  double eta_;
  double relative_gap_;
};

inline void to_json(nlohmann::json& j, const Spectrum& s) {
  j = nlohmann::json{{"energies", s.energy_vector()}, {"eta", s.eta()}, {"n", s.n()}};
}

/// Parses {"energies": [...], "eta": x, "n": k}; "n" is optional but must match when present.
inline Spectrum spectrum_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidSpectrum("spectrum: expected a JSON object");
  if (!j.contains("energies") || !j.at("energies").is_array())
    throw InvalidSpectrum("spectrum: missing array field 'energies'");
  if (!j.contains("eta") || !j.at("eta").is_number()) throw InvalidSpectrum("spectrum: missing numeric field 'eta'");
  std::vector<double> energies;
  for (const auto& e : j.at("energies")) {
    if (!e.is_number()) throw InvalidSpectrum("spectrum: 'energies' must contain only numbers");
    energies.push_back(e.get<double>());
  }
  if (j.contains("n")) {
    if (!j.at("n").is_number_integer()) throw InvalidSpectrum("spectrum: 'n' must be an integer");
    const auto n = j.at("n").get<long long>();
    if (n < 1 || static_cast<std::size_t>(n) != energies.size()) {
      std::ostringstream os;
      os << "spectrum: n = " << n << " does not match " << energies.size() << " energies";
      throw InvalidSpectrum(os.str());
    }
  }
  return Spectrum(std::move(energies), j.at("eta").get<double>());
}

/// Real coordinates of an N x N Hermitian matrix: the diagonal plus the real
/// and imaginary parts of the strict upper triangle in row-major order.
struct HermitianPoint {
  std::vector<double> diag;
  std::vector<double> offdiag_re;
  std::vector<double> offdiag_im;

  std::size_t n() const { return diag.size(); }

  static std::size_t offdiag_count(std::size_t n) { return n * (n - 1) / 2; }

  Eigen::MatrixXcd matrix() const {
    const auto dim = static_cast<Eigen::Index>(n());
    Eigen::MatrixXcd m(dim, dim);
    std::size_t p = 0;
    for (Eigen::Index k = 0; k < dim; ++k) {
      m(k, k) = diag[static_cast<std::size_t>(k)];
      for (Eigen::Index l = k + 1; l < dim; ++l, ++p) {
        const std::complex<double> z(offdiag_re[p], offdiag_im[p]);
        m(k, l) = z;
        m(l, k) = std::conj(z);
      }
    }
    return m;
  }

  static HermitianPoint from_matrix(const Eigen::MatrixXcd& m) {
    HermitianPoint pt;
    const auto dim = m.rows();
    for (Eigen::Index k = 0; k < dim; ++k) {
      pt.diag.push_back(m(k, k).real());
      for (Eigen::Index l = k + 1; l < dim; ++l) {
        pt.offdiag_re.push_back(m(k, l).real());
        pt.offdiag_im.push_back(m(k, l).imag());
      }
    }
    return pt;
  }
};

/// Monic characteristic polynomial P(x) = prod (x - E_i), coefficients stored
/// lowest degree first.
class CharPoly {
 public:
  static CharPoly from_roots(std::span<const double> roots) {
    std::vector<double> c{1.0};
    for (double r : roots) {
      std::vector<double> next(c.size() + 1, 0.0);
      for (std::size_t m = 0; m < c.size(); ++m) {
        next[m + 1] += c[m];
        next[m] -= r * c[m];
      }
      c = std::move(next);
    }
    return CharPoly(std::move(c), std::vector<double>(roots.begin(), roots.end()));
  }

  std::size_t degree() const { return coeffs_.size() - 1; }
  std::span<const double> coefficients() const { return coeffs_; }
  std::span<const double> roots() const { return roots_; }

  double operator()(double x) const {
    double acc = 0.0;
    for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * x + *it;
    return acc;
  }

  double derivative(double x) const {
    double acc = 0.0;
    for (std::size_t m = coeffs_.size() - 1; m >= 1; --m) acc = acc * x + static_cast<double>(m) * coeffs_[m];
    return acc;
  }

  /// P'(E_j) from the factored form, which stays accurate at the roots.
  double derivative_at_root(std::size_t j) const {
    double p = 1.0;
    for (std::size_t m = 0; m < roots_.size(); ++m)
      if (m != j) p *= roots_[j] - roots_[m];
    return p;
  }

  /// Largest |coefficient|, the natural scale for root residuals.
  double coefficient_scale() const {
    double s = 0.0;
    for (double c : coeffs_) s = std::max(s, std::abs(c));
    return s;
  }

 private:
  CharPoly(std::vector<double> c, std::vector<double> r) : coeffs_(std::move(c)), roots_(std::move(r)) {}
  std::vector<double> coeffs_;
  std::vector<double> roots_;
};

/// prod_{k<l} (E_l - E_k) in the stored order. Degenerate input gives 0.
///
/// The magnitude is multiplied out over the sorted values and the sign taken
/// from the parity of the ordering, so any transposition flips the sign exactly.
inline double vandermonde(std::span<const double> energies) {
  std::vector<double> sorted(energies.begin(), energies.end());
  std::sort(sorted.begin(), sorted.end());
  double v = 1.0;
  for (std::size_t k = 0; k < sorted.size(); ++k)
    for (std::size_t l = k + 1; l < sorted.size(); ++l) v *= sorted[l] - sorted[k];
  bool odd = false;
  for (std::size_t k = 0; k < energies.size(); ++k)
    for (std::size_t l = k + 1; l < energies.size(); ++l)
      if (energies[l] < energies[k]) odd = !odd;
  return odd ? -v : v;
}

inline double vandermonde(const Spectrum& s) { return vandermonde(s.energies()); }

/// Ascending eigenvalues of a Hermitian matrix.
inline std::vector<double> hermitian_eigenvalues(const Eigen::MatrixXcd& h) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(h, Eigen::EigenvaluesOnly);
  const auto& ev = solver.eigenvalues();
  return std::vector<double>(ev.data(), ev.data() + ev.size());
}

namespace detail {

inline void require_nondegenerate(std::span<const double> ev, double relative_gap = kDefaultRelativeGap) {
  double scale = 0.0;
  for (double e : ev) scale = std::max(scale, std::abs(e));
  const double threshold = relative_gap * std::max(scale, 1e-300);
  for (std::size_t i = 0; i < ev.size(); ++i)
    for (std::size_t j = i + 1; j < ev.size(); ++j)
      if (std::abs(ev[i] - ev[j]) <= threshold) throw DegenerateSpectrum("eigenvalues closer than the admissible gap");
}

inline Eigen::MatrixXcd remove_row_col(const Eigen::MatrixXcd& m, Eigen::Index row, Eigen::Index col) {
  const auto n = m.rows();
  Eigen::MatrixXcd out(n - 1, n - 1);
  for (Eigen::Index r = 0, rr = 0; r < n; ++r) {
    if (r == row) continue;
    for (Eigen::Index c = 0, cc = 0; c < n; ++c) {
      if (c == col) continue;
      out(rr, cc++) = m(r, c);
    }
    ++rr;
  }
  return out;
}

}  // namespace detail

/// dE_j/dH_ki = (-1)^{k+i} |E_j Id - H|_{ki} / P'(E_j), where |.|_{ki} is the
/// minor with row k and column i removed and eigenvalues are indexed in
/// ascending order (all indices 0-based).
///
/// Off-diagonal entries use the Wirtinger derivative
/// d/dH_ki = (d/dRe H_ki - i d/dIm H_ki) / 2, so the result is complex in
/// general; it is real whenever H is real symmetric.
inline std::complex<double> eigen_derivative(const Eigen::MatrixXcd& h, std::size_t j, std::size_t k, std::size_t i) {
  const auto n = static_cast<std::size_t>(h.rows());
  if (j >= n || k >= n || i >= n) throw DomainError("eigen_derivative: index out of range");
  const auto ev = hermitian_eigenvalues(h);
  detail::require_nondegenerate(ev);
  const auto poly = CharPoly::from_roots(ev);
  const double dp = poly.derivative_at_root(j);

  std::complex<double> minor = 1.0;
  if (n > 1) {
    Eigen::MatrixXcd shifted = -h;
    shifted.diagonal().array() += ev[j];
    minor = detail::remove_row_col(shifted, static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)).determinant();
  }
  const double sign = ((k + i) % 2 == 0) ? 1.0 : -1.0;
  return sign * minor / dp;
}

using SymmetricFunction = std::function<double(std::span<const double>)>;

namespace detail {

/// 4th-order central first and second derivatives of fn along axis i.
inline std::pair<double, double> axis_derivatives(const SymmetricFunction& fn, std::vector<double> x, std::size_t i,
                                                  double h) {
  const double x0 = x[i];
  auto at = [&](double offset) {
    x[i] = x0 + offset;
    return fn(x);
  };
  const double fp2 = at(2 * h), fp1 = at(h), fm1 = at(-h), fm2 = at(-2 * h);
  x[i] = x0;
  const double f0 = fn(x);
  const double d1 = (-fp2 + 8 * fp1 - 8 * fm1 + fm2) / (12 * h);
  const double d2 = (-fp2 + 16 * fp1 - 30 * f0 + 16 * fm1 - fm2) / (12 * h * h);
  return {d1, d2};
}

inline double eigenvalue_laplacian_at_step(const SymmetricFunction& fn, std::span<const double> ev, double h) {
  const std::vector<double> x(ev.begin(), ev.end());
  const std::size_t n = x.size();
  std::vector<double> d1(n), d2(n);
  for (std::size_t i = 0; i < n; ++i) std::tie(d1[i], d2[i]) = axis_derivatives(fn, x, i, h);
  double lap = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    lap += d2[i];
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) lap += (d1[i] - d1[j]) / (x[i] - x[j]);
  }
  return lap;
}

}  // namespace detail

/// Eigenvalue form of the Hermitian-matrix Laplacian acting on a symmetric
/// function: sum_i d^2/dE_i^2 + sum_{i != j} (d_i - d_j)/(E_i - E_j).
/// Derivatives come from 4th-order central differences with one Richardson step.
inline double eigenvalue_laplacian(const SymmetricFunction& fn, std::span<const double> ev, double h = 1e-3) {
  detail::require_nondegenerate(ev);
  double min_gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ev.size(); ++i)
    for (std::size_t j = i + 1; j < ev.size(); ++j) min_gap = std::min(min_gap, std::abs(ev[i] - ev[j]));
  h = std::min(h, min_gap / 10.0);
  const double coarse = detail::eigenvalue_laplacian_at_step(fn, ev, h);
  const double fine = detail::eigenvalue_laplacian_at_step(fn, ev, h / 2);
  return (64.0 * fine - coarse) / 63.0;
}

/// Right-hand side of the matrix-to-eigenvalue Laplacian rewrite, evaluated
/// at the eigenvalues of h.
inline double matrix_laplacian_on_symmetric(const SymmetricFunction& fn, const Eigen::MatrixXcd& h,
                                            double step = 1e-3) {
  const auto ev = hermitian_eigenvalues(h);
  return eigenvalue_laplacian(fn, ev, step);
}

/// Entry-space Laplacian sum_{i,k} d/dH_ki d/dH_ik of F(H) = fn(eig(H)) by
/// central differences over the N^2 real coordinates. With the Wirtinger
/// convention each off-diagonal pair contributes (d_Re^2 + d_Im^2)/2.
inline double entry_space_laplacian(const SymmetricFunction& fn, const Eigen::MatrixXcd& h, double step = 1e-4) {
  const auto n = h.rows();
  auto F = [&](const Eigen::MatrixXcd& m) { return fn(hermitian_eigenvalues(m)); };
  const double f0 = F(h);
  auto second = [&](Eigen::Index k, Eigen::Index l, std::complex<double> dir, double s) {
    Eigen::MatrixXcd p = h, m = h;
    p(k, l) += s * dir;
    m(k, l) -= s * dir;
    if (k != l) {
      p(l, k) += s * std::conj(dir);
      m(l, k) -= s * std::conj(dir);
    }
    return (F(p) - 2.0 * f0 + F(m)) / (s * s);
  };
  auto laplacian_at = [&](double s) {
    double lap = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      lap += second(k, k, 1.0, s);
      for (Eigen::Index l = k + 1; l < n; ++l) {
        lap += 0.5 * second(k, l, {1.0, 0.0}, s);
        lap += 0.5 * second(k, l, {0.0, 1.0}, s);
      }
    }
    return lap;
  };
  const double coarse = laplacian_at(step);
  const double fine = laplacian_at(step / 2);
  return (4.0 * fine - coarse) / 3.0;
}

}  // namespace phi4mm
