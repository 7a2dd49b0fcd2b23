#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <queue>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "phi4mm/error.hpp"
#include "phi4mm/summation.hpp"

namespace phi4mm {

/// Gauss-Legendre rule on [-1, 1]; nodes ascending.
struct GaussLegendreRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
};

inline GaussLegendreRule gauss_legendre(std::size_t n) {
  if (n == 0) throw DomainError("gauss_legendre: need at least one node");
  GaussLegendreRule rule;
  rule.nodes.assign(n, 0.0);
  rule.weights.assign(n, 0.0);
  const std::size_t half = (n + 1) / 2;
  for (std::size_t i = 0; i < half; ++i) {
    double z = std::cos(M_PI * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p1 = 1.0, p2 = 0.0;
      for (std::size_t j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / static_cast<double>(j);
      }
      pp = static_cast<double>(n) * (z * p1 - p2) / (z * z - 1.0);
      const double dz = p1 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    {
      // one more derivative evaluation at the converged node
      double p1 = 1.0, p2 = 0.0;
      for (std::size_t j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / static_cast<double>(j);
      }
      pp = static_cast<double>(n) * (z * p1 - p2) / (z * z - 1.0);
    }
    rule.nodes[i] = -z;
    rule.nodes[n - 1 - i] = z;
    const double w = 2.0 / ((1.0 - z * z) * pp * pp);
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

/// Tensor-product grid description for the eigenvalue-space integrals.
///
/// Each axis uses the same Gauss-Legendre reference rule mapped onto
/// sub-intervals of [0, half_width] (the reflected half of [-L, L]).
/// pv_epsilon is the exclusion half-width of the principal-value windows;
/// 0 disables the windows and the extrapolation.
struct QuadGrid {
  std::size_t nodes = 48;
  double half_width = 6.0;
  double pv_epsilon = 1e-3;
  double tolerance = 1e-4;
  GaussLegendreRule rule = gauss_legendre(48);

  static QuadGrid make(std::size_t nodes, double half_width, double pv_epsilon = 1e-3, double tolerance = 1e-4) {
    QuadGrid g;
    g.nodes = nodes;
    g.half_width = half_width;
    g.pv_epsilon = pv_epsilon;
    g.tolerance = tolerance;
    g.rule = gauss_legendre(nodes);
    g.validate();
    return g;
  }

  /// Truncation L such that exp(-N E_min L^2) < 1e-16.
  static double truncation_for(std::size_t n, double min_energy) {
    return std::sqrt(std::log(1e16) / (static_cast<double>(n) * min_energy));
  }

  void validate() const {
    if (!(half_width > 0.0)) throw ConfigInvalid("quad: L must be > 0");
    if (!(pv_epsilon >= 0.0) || pv_epsilon >= half_width) throw ConfigInvalid("quad: pv_epsilon must lie in [0, L)");
    if (!(tolerance > 0.0)) throw ConfigInvalid("quad: tolerance must be > 0");
    if (rule.size() != nodes) throw ConfigInvalid("quad: rule does not match node count");
    for (std::size_t i = 0; i < rule.size(); ++i) {
      if (!(rule.weights[i] > 0.0)) throw ConfigInvalid("quad: weights must be positive");
      if (i > 0 && !(rule.nodes[i] > rule.nodes[i - 1])) throw ConfigInvalid("quad: nodes must be strictly increasing");
    }
  }
};

inline void to_json(nlohmann::json& j, const QuadGrid& g) {
  j = nlohmann::json{{"nodes", g.nodes}, {"L", g.half_width}, {"pv_epsilon", g.pv_epsilon}, {"tolerance", g.tolerance}};
}

/// Result of a one-dimensional adaptive integration.
struct AdaptiveResult {
  double value = 0.0;
  double error = 0.0;
  std::size_t evaluations = 0;
};

namespace detail {

inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851, 0.864864423359769072789712788640926,
    0.741531185599394439863864773280788, 0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204, 0.104790010322250183839876322541518,
    0.140653259715525918745189590510238, 0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780, 0.381830050505118944950369775488975,
    0.417959183673469387755102040816327};

struct Segment {
  double a, b, value, error;
  bool operator<(const Segment& o) const { return error < o.error; }
};

template <class F>
Segment gauss_kronrod_15(F& f, double a, double b) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  const double fc = f(c);
  double k = fc * kKronrodWeights[7];
  double g = fc * kGaussWeights[3];
  for (std::size_t j = 0; j < 7; ++j) {
    const double dx = h * kKronrodNodes[j];
    const double sum = f(c - dx) + f(c + dx);
    k += kKronrodWeights[j] * sum;
    if (j % 2 == 1) g += kGaussWeights[j / 2] * sum;
  }
  return {a, b, k * h, std::abs((k - g) * h)};
}

}  // namespace detail

/// Globally adaptive 15-point Gauss-Kronrod integration on [a, b]; the worst
/// segment is bisected until the summed error estimate meets the tolerance.
template <class F>
AdaptiveResult integrate_adaptive(F&& f, double a, double b, double abs_tol = 1e-12, double rel_tol = 1e-12,
                                  std::size_t max_segments = 4000) {
  std::size_t evals = 0;
  auto counted = [&](double x) {
    ++evals;
    return f(x);
  };
  std::priority_queue<detail::Segment> queue;
  queue.push(detail::gauss_kronrod_15(counted, a, b));
  double total = queue.top().value, err = queue.top().error;
  while (err > std::max(abs_tol, rel_tol * std::abs(total)) && queue.size() < max_segments) {
    const auto worst = queue.top();
    queue.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    const auto left = detail::gauss_kronrod_15(counted, worst.a, mid);
    const auto right = detail::gauss_kronrod_15(counted, mid, worst.b);
    queue.push(left);
    queue.push(right);
    // re-sum from scratch to keep the running totals free of drift
    CompensatedSum v, e;
    auto copy = queue;
    while (!copy.empty()) {
      v += copy.top().value;
      e += copy.top().error;
      copy.pop();
    }
    total = v.value();
    err = e.value();
  }
  if (err > std::max(abs_tol, rel_tol * std::abs(total))) {
    std::ostringstream os;
    os << "integrate_adaptive: error estimate " << err << " above tolerance after " << queue.size() << " segments";
    throw NonConvergent(os.str());
  }
  return {total, err, evals};
}

/// Adaptive integration over [0, inf) through x = t / (1 - t).
template <class F>
AdaptiveResult integrate_half_line(F&& f, double abs_tol = 1e-12, double rel_tol = 1e-12) {
  auto mapped = [&](double t) {
    const double s = 1.0 - t;
    const double x = t / s;
    const double v = f(x);
    return v == 0.0 ? 0.0 : v / (s * s);
  };
  return integrate_adaptive(mapped, 0.0, 1.0, abs_tol, rel_tol);
}

}  // namespace phi4mm
