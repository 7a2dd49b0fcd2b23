#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "phi4mm/error.hpp"
#include "phi4mm/monte_carlo.hpp"
#include "phi4mm/report.hpp"
#include "phi4mm/spectra.hpp"

namespace phi4mm {

inline constexpr std::size_t kMaxHcizMonteCarloN = 3;

/// Eigenvalues of A and B and the coupling t of exp(t tr(A U B U^dagger)).
struct HcizInstance {
  std::vector<double> a;
  std::vector<double> b;
  double t = 1.0;
  double relative_gap = kDefaultRelativeGap;

  std::size_t n() const { return a.size(); }

  void validate() const {
    if (a.empty() || a.size() != b.size()) throw DomainError("hciz: A and B need the same nonzero size");
    if (!(t != 0.0) || !std::isfinite(t)) throw DomainError("hciz: t must be finite and nonzero");
    auto distinct = [&](const std::vector<double>& v, const char* label) {
      double scale = 0.0;
      for (double x : v) {
        if (!std::isfinite(x)) throw DomainError(std::string("hciz: non-finite eigenvalue in ") + label);
        scale = std::max(scale, std::abs(x));
      }
      for (std::size_t i = 0; i < v.size(); ++i)
        for (std::size_t j = i + 1; j < v.size(); ++j)
          if (std::abs(v[i] - v[j]) <= relative_gap * std::max(scale, 1.0)) {
            std::ostringstream os;
            os << "hciz: eigenvalues " << i << " and " << j << " of " << label << " coincide";
            throw DegenerateSpectrum(os.str());
          }
    };
    distinct(a, "A");
    distinct(b, "B");
  }

  HcizInstance shifted_a(double c) const {
    auto out = *this;
    for (double& x : out.a) x += c;
    return out;
  }

  HcizInstance swapped() const { return {b, a, t, relative_gap}; }
};

inline void to_json(nlohmann::json& j, const HcizInstance& h) { j = nlohmann::json{{"a", h.a}, {"b", h.b}, {"t", h.t}}; }

inline HcizInstance hciz_instance_from_json(const nlohmann::json& j) {
  return {j.at("a").get<std::vector<double>>(), j.at("b").get<std::vector<double>>(), j.at("t").get<double>()};
}

/// (prod_{i<N} i!) pi^{N(N-1)/2}.
inline double hciz_constant(std::size_t n) {
  double c = std::pow(M_PI, 0.5 * static_cast<double>(n * (n - 1)));
  double fact = 1.0;
  for (std::size_t i = 1; i < n; ++i) {
    fact *= static_cast<double>(i);
    c *= fact;
  }
  return c;
}

/// c_N det(exp(t a_i b_j)) / (t^{N(N-1)/2} Delta(a) Delta(b)); each row is
/// scaled by its largest exponential before the determinant.
inline double hciz_rhs(const HcizInstance& h) {
  h.validate();
  const auto n = static_cast<Eigen::Index>(h.n());
  Eigen::MatrixXd m(n, n);
  double log_scale = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double top = -HUGE_VAL;
    for (Eigen::Index j = 0; j < n; ++j) top = std::max(top, h.t * h.a[i] * h.b[j]);
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = std::exp(h.t * h.a[i] * h.b[j] - top);
    log_scale += top;
  }
  const double det = m.fullPivLu().determinant();
  const double denom = std::pow(h.t, 0.5 * static_cast<double>(h.n() * (h.n() - 1))) * vandermonde(h.a) * vandermonde(h.b);
  return hciz_constant(h.n()) * std::exp(log_scale) * det / denom;
}

/// exp(t tr(A U B U^dagger)) for diagonal A, B: t sum_{ij} a_i b_j |U_ij|^2.
inline double hciz_integrand(const HcizInstance& h, const Eigen::MatrixXcd& u) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < u.rows(); ++i)
    for (Eigen::Index j = 0; j < u.cols(); ++j) s += h.a[i] * h.b[j] * std::norm(u(i, j));
  return std::exp(h.t * s);
}

/// Probability-normalized Haar average of exp(t tr(A U B U^dagger)).
inline Estimate hciz_lhs_mc(const HcizInstance& h, const McConfig& config, unsigned workers = 1) {
  h.validate();
  if (h.n() > kMaxHcizMonteCarloN) throw DomainError("hciz_lhs_mc: N must be <= 3");
  auto draw = [&h](NormalStream& stream) { return hciz_integrand(h, haar_unitary(stream, h.n())); };
  return mc_estimate(config, draw, "hciz-haar-mc", workers);
}

struct HcizRatio {
  HcizInstance instance;
  Estimate lhs;
  double rhs = 0.0;
  double ratio() const { return lhs.value / rhs; }
  double ratio_error() const { return lhs.error / std::abs(rhs); }
};

/// Ratio lhs/rhs for each instance (instance i sampled with seed + i); the first
/// instance is the calibration reference. Residual: largest deviation from the
/// reference ratio in units of the combined standard error.
inline VerificationReport hciz_ratio_check(const std::vector<HcizInstance>& instances, const McConfig& config,
                                           double sigma_tolerance = 3.0, unsigned workers = 1) {
  VerificationReport r;
  r.check = "hciz";
  r.paper_ref = "HCIZ determinant formula, normalization ratio constancy";
  r.seed = config.seed;
  if (instances.empty()) throw ConfigInvalid("hciz: at least one instance is required");
  r.n = instances.front().n();
  std::vector<HcizRatio> rows;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (instances[i].n() != r.n) throw ConfigInvalid("hciz: all instances in one check must share N");
    rows.push_back({instances[i], hciz_lhs_mc(instances[i], config.with_seed(config.seed + i), workers),
                    hciz_rhs(instances[i])});
  }
  const auto& ref = rows.front();
  nlohmann::json table = nlohmann::json::array();
  double worst = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    double z = 0.0;
    if (i > 0) {
      const double sigma = std::hypot(row.ratio_error(), ref.ratio_error());
      const double diff = row.ratio() - ref.ratio();
      z = sigma > 0.0 ? diff / sigma : (diff == 0.0 ? 0.0 : HUGE_VAL);
      worst = std::max(worst, std::abs(z));
    }
    table.push_back({{"instance", row.instance}, {"lhs", row.lhs}, {"rhs", row.rhs}, {"ratio", row.ratio()},
                     {"ratio_stderr", row.ratio_error()}, {"sigmas_from_reference", z}});
  }
  r.inputs = {{"instances", table},
              {"mc", config},
              {"probability_haar_ratio", std::pow(M_PI, -0.5 * static_cast<double>(r.n * (r.n - 1)))}};
  r.add("max_sigmas_from_reference", worst, sigma_tolerance);
  r.config_hash = config_hash(r.inputs);
  return r;
}

/// Five instances per N with moderate t |a| |b| so the Haar average has small variance.
inline std::vector<HcizInstance> default_hciz_battery(std::size_t n) {
  switch (n) {
    case 1: return {{{0.5}, {1.0}, 1.0}, {{1.0}, {2.0}, 0.5}, {{-1.0}, {0.3}, 2.0}, {{0.2}, {-0.7}, 1.0}, {{1.5}, {1.0}, -0.5}};
    case 2:
      return {{{0.0, 1.0}, {0.0, 1.0}, 1.0},
              {{0.0, 1.0}, {0.0, 1.0}, 0.5},
              {{0.0, 1.0}, {0.0, 1.0}, 2.0},
              {{-0.5, 0.8}, {0.2, 1.1}, 1.0},
              {{0.3, -1.0}, {0.5, -0.4}, -1.5}};
    case 3:
      return {{{0.0, 0.5, 1.0}, {0.0, 0.5, 1.0}, 1.0},
              {{0.0, 0.5, 1.0}, {0.0, 0.5, 1.0}, 2.0},
              {{-0.4, 0.3, 0.9}, {0.1, 0.6, 1.2}, 1.0},
              {{0.2, -0.6, 0.7}, {0.0, 1.0, -0.5}, -1.0},
              {{0.1, 0.4, 1.3}, {-0.3, 0.2, 0.8}, 1.5}};
    default: throw DomainError("default_hciz_battery: N must be 1, 2 or 3");
  }
}

}  // namespace phi4mm
