#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "phi4mm/error.hpp"
#include "phi4mm/monte_carlo.hpp"
#include "phi4mm/provenance.hpp"
#include "phi4mm/quadrature.hpp"

namespace phi4mm {

inline constexpr std::size_t kMaxPvDimension = 4;

namespace detail {

/// A signed permutation y -> (s_0 y_{p_0}, ..., s_{k-1} y_{p_{k-1}}).
struct SignedPermutation {
  std::vector<std::size_t> perm;
  std::vector<double> sign;
};

inline std::vector<SignedPermutation> hyperoctahedral_group(std::size_t k) {
  std::vector<SignedPermutation> group;
  std::vector<std::size_t> perm(k);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  do {
    for (std::size_t mask = 0; mask < (std::size_t{1} << k); ++mask) {
      SignedPermutation g{perm, std::vector<double>(k, 1.0)};
      for (std::size_t i = 0; i < k; ++i)
        if (mask & (std::size_t{1} << i)) g.sign[i] = -1.0;
      group.push_back(std::move(g));
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return group;
}

template <class F>
class ChamberIntegrator {
 public:
  ChamberIntegrator(F& f, std::size_t k, const GaussLegendreRule& rule, double half_width)
      : f_(f), k_(k), rule_(rule), half_width_(half_width), group_(hyperoctahedral_group(k)), y_(k), x_(k) {}

  /// Integral of the group-symmetrized integrand over
  /// 0 <= y_0 < y_1 - window < ... and y_{k-1} <= L, plus the same for |g|.
  std::pair<double, double> integrate(double window) {
    window_ = window;
    return level(0, 0.0);
  }

  std::size_t evaluations() const { return evaluations_; }

 private:
  double symmetrized() {
    CompensatedSum acc;
    for (const auto& g : group_) {
      for (std::size_t i = 0; i < k_; ++i) x_[i] = g.sign[i] * y_[g.perm[i]];
      acc += f_(std::span<const double>(x_));
    }
    evaluations_ += group_.size();
    return acc.value();
  }

  std::pair<double, double> level(std::size_t j, double lower) {
    if (lower >= half_width_) return {0.0, 0.0};
    const double half = 0.5 * (half_width_ - lower), mid = 0.5 * (half_width_ + lower);
    CompensatedSum value, magnitude;
    for (std::size_t q = 0; q < rule_.size(); ++q) {
      y_[j] = mid + half * rule_.nodes[q];
      const double w = half * rule_.weights[q];
      if (j + 1 == k_) {
        const double g = symmetrized();
        value += w * g;
        magnitude += w * std::abs(g);
      } else {
        const auto [v, m] = level(j + 1, y_[j] + window_);
        value += w * v;
        magnitude += w * m;
      }
    }
    return {value.value(), magnitude.value()};
  }

  F& f_;
  std::size_t k_;
  const GaussLegendreRule& rule_;
  double half_width_;
  double window_ = 0.0;
  std::vector<SignedPermutation> group_;
  std::vector<double> y_, x_;
  std::size_t evaluations_ = 0;
};

}  // namespace detail

/// Principal-value integral of f over [-L, L]^k, where f may carry simple
/// poles on the hyperplanes x_i + x_j = 0.
///
/// f is summed over all 2^k k! signed permutations of its argument, which
/// removes the poles, and the result is integrated over the ordered chamber
/// with nested Gauss-Legendre rules. Windows |y_j - y_{j-1}| < eps are cut
/// out at eps, eps/2, eps/4 and the result extrapolated to eps -> 0. The
/// error bound adds the extrapolation spread and a coarse-rule comparison.
template <class F>
Estimate pv_integral(F&& f, std::size_t k, const QuadGrid& grid) {
  if (k < 1 || k > kMaxPvDimension) throw DomainError("pv_integral: dimension must be in [1, 4]");
  grid.validate();
  const std::size_t coarse_nodes = std::max<std::size_t>(4, (2 * grid.nodes) / 3);
  const auto coarse_rule = gauss_legendre(coarse_nodes);
  detail::ChamberIntegrator fine(f, k, grid.rule, grid.half_width);
  detail::ChamberIntegrator coarse(f, k, coarse_rule, grid.half_width);

  const bool windowed = grid.pv_epsilon > 0.0 && k >= 2;
  const double eps = grid.pv_epsilon;
  double value = 0.0, extrapolation_spread = 0.0, scale = 0.0, quadrature_spread = 0.0;
  if (windowed) {
    const double i1 = fine.integrate(eps).first;
    const double i2 = fine.integrate(eps / 2).first;
    const auto [i4, abs4] = fine.integrate(eps / 4);
    const double c4 = coarse.integrate(eps / 4).first;
    const double three = (8.0 / 3.0) * i4 - 2.0 * i2 + (1.0 / 3.0) * i1;
    const double two = 2.0 * i4 - i2;
    value = three;
    extrapolation_spread = std::abs(three - two);
    quadrature_spread = std::abs(i4 - c4);
    scale = abs4;
  } else {
    const auto [i0, abs0] = fine.integrate(0.0);
    value = i0;
    quadrature_spread = std::abs(i0 - coarse.integrate(0.0).first);
    scale = abs0;
  }
  if (extrapolation_spread > grid.tolerance * std::max(scale, 1e-300)) {
    std::ostringstream os;
    os << "pv_integral: window extrapolation spread " << extrapolation_spread << " exceeds tolerance "
       << grid.tolerance << " relative to scale " << scale;
    throw NonConvergent(os.str());
  }

  Estimate e;
  e.value = value;
  e.error = extrapolation_spread + quadrature_spread;
  e.kind = ErrorKind::Bound;
  e.method = "pv-chamber-gl";
  e.cost = fine.evaluations() + coarse.evaluations();
  e.config_hash = config_hash(nlohmann::json(grid));
  return e;
}

}  // namespace phi4mm
