#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>

#include "phi4mm/report.hpp"
#include "phi4mm/spectra.hpp"
#include "phi4mm/summation.hpp"

namespace phi4mm {

enum class Quantity { Maru1, Maru2, Maru3, BubbleB, RhsN2Z };

inline std::string to_string(Quantity q) {
  switch (q) {
    case Quantity::Maru1: return "maru1";
    case Quantity::Maru2: return "maru2";
    case Quantity::Maru3: return "maru3";
    case Quantity::BubbleB: return "bubble_B";
    case Quantity::RhsN2Z: return "rhs_N2Z";
  }
  return "unknown";
}

/// Coefficients of Z_f eta^0 and Z_f eta^1 (the factor eta stripped).
struct PerturbativeTerms {
  Quantity quantity;
  double order0 = 0.0;
  double order1 = 0.0;
};

/// <Phi_ab Phi_cd>_f / Z_f = (1/N) delta_ad delta_bc / (E_a + E_b); indices 0-based.
inline double propagator(const Spectrum& s, std::size_t a, std::size_t b, std::size_t c, std::size_t d) {
  if (std::max({a, b, c, d}) >= s.n()) throw DomainError("propagator: index out of range");
  if (a != d || b != c) return 0.0;
  return 1.0 / (static_cast<double>(s.n()) * (s.energy(a) + s.energy(b)));
}

namespace detail {

inline double pair_inverse(const Spectrum& s, std::size_t i, std::size_t j) { return 1.0 / (s.energy(i) + s.energy(j)); }

/// S3 = sum_{m,n,s} 1/((E_m + E_n)(E_m + E_s)).
inline double triple_sum(const Spectrum& s) {
  CompensatedSum acc;
  for (std::size_t m = 0; m < s.n(); ++m)
    for (std::size_t n = 0; n < s.n(); ++n)
      for (std::size_t k = 0; k < s.n(); ++k) acc += pair_inverse(s, m, n) * pair_inverse(s, m, k);
  return acc.value();
}

/// B / eta from the closed form.
inline double bubble_coefficient(const Spectrum& s) {
  CompensatedSum inv_sq;
  for (double e : s.energies()) inv_sq += 1.0 / (e * e);
  return -(0.5 * triple_sum(s) + inv_sq.value() / 16.0) / static_cast<double>(s.n());
}

}  // namespace detail

/// Bubble factor B, including the factor eta.
inline double bubble_factor(const Spectrum& s) { return s.eta() * detail::bubble_coefficient(s); }

/// Order-eta coefficient of <-(N/4) Tr Phi^4>_f / Z_f by summing all three Wick
/// pairings of Phi_ab Phi_bc Phi_cd Phi_da over every index quadruple.
inline double first_order_wick_coefficient(const Spectrum& s) {
  const std::size_t n = s.n();
  CompensatedSum acc;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t c = 0; c < n; ++c)
        for (std::size_t d = 0; d < n; ++d) {
          // fields: (a,b) (b,c) (c,d) (d,a)
          acc += propagator(s, a, b, b, c) * propagator(s, c, d, d, a);
          acc += propagator(s, a, b, c, d) * propagator(s, b, c, d, a);
          acc += propagator(s, a, b, d, a) * propagator(s, b, c, c, d);
        }
  return -0.25 * static_cast<double>(n) * acc.value();
}

/// The three pieces of L_SD Z expanded to first order in eta, each as
/// coefficients of Z_f: (eta/N) sum d_i^2 Z, (eta/N) sum_{i!=j} (d_i - d_j) Z/(E_i - E_j),
/// and -2 sum E_k d_k Z.
inline std::array<PerturbativeTerms, 3> sd_terms(const Spectrum& s) {
  const std::size_t n = s.n();
  const double nn = static_cast<double>(n);

  CompensatedSum pair_sq, quarter_inv_sq;
  for (std::size_t i = 0; i < n; ++i) {
    quarter_inv_sq += 1.0 / (4.0 * s.energy(i) * s.energy(i));
    for (std::size_t j = 0; j < n; ++j) {
      const double p = detail::pair_inverse(s, i, j);
      pair_sq += p * p;
    }
  }
  const PerturbativeTerms maru1{Quantity::Maru1, 0.0,
                                (detail::triple_sum(s) + pair_sq.value() + quarter_inv_sq.value()) / nn};

  CompensatedSum cross;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      for (std::size_t k = 0; k < n; ++k) cross += detail::pair_inverse(s, i, k) * detail::pair_inverse(s, j, k);
    }
  const PerturbativeTerms maru2{Quantity::Maru2, 0.0, cross.value() / nn};

  // 2 sum_{k,j} E_k/(E_k + E_j) {1 + B - (eta/N) (E_k + E_j)^{-1} sum_n (...)} - (eta/4N) sum_k E_k^{-2}
  const double b = detail::bubble_coefficient(s);
  CompensatedSum zeroth, first;
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t j = 0; j < n; ++j) {
      const double pkj = detail::pair_inverse(s, k, j);
      const double weight = 2.0 * s.energy(k) * pkj;
      CompensatedSum inner;
      for (std::size_t m = 0; m < n; ++m) inner += detail::pair_inverse(s, k, m) + detail::pair_inverse(s, j, m);
      zeroth += weight;
      first += weight * (b - pkj * inner.value() / nn);
    }
    first += -1.0 / (4.0 * nn * s.energy(k) * s.energy(k));
  }
  const PerturbativeTerms maru3{Quantity::Maru3, zeroth.value(), first.value()};
  return {maru1, maru2, maru3};
}

inline PerturbativeTerms bubble_terms(const Spectrum& s) {
  return {Quantity::BubbleB, 0.0, detail::bubble_coefficient(s)};
}

/// N^2 Z at orders eta^0 and eta^1, with the first-order part from the
/// independent Wick sum.
inline PerturbativeTerms rhs_terms(const Spectrum& s) {
  const double n2 = static_cast<double>(s.n() * s.n());
  return {Quantity::RhsN2Z, n2, n2 * first_order_wick_coefficient(s)};
}

inline VerificationReport sd_check_first_order(const Spectrum& s, double tolerance = 1e-12) {
  const auto terms = sd_terms(s);
  const auto rhs = rhs_terms(s);
  CompensatedSum lhs0, lhs1;
  for (const auto& t : terms) {
    lhs0 += t.order0;
    lhs1 += t.order1;
  }
  VerificationReport r;
  r.check = "perturbative-sd";
  r.paper_ref = "perturbative Schwinger-Dyson identity, orders eta^0 and eta^1";
  r.inputs = {{"spectrum", s}};
  r.n = s.n();
  r.eta = s.eta();
  r.add("order0_relative", (lhs0.value() - rhs.order0) / std::abs(rhs.order0), tolerance, std::abs(rhs.order0));
  r.add("order1_relative", (lhs1.value() - rhs.order1) / std::abs(rhs.order1), tolerance, std::abs(rhs.order1));
  r.inputs["lhs_order0"] = lhs0.value();
  r.inputs["lhs_order1"] = lhs1.value() * s.eta();
  r.inputs["rhs_order1"] = rhs.order1 * s.eta();
  return r;
}

}  // namespace phi4mm
