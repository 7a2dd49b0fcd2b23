#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "phi4mm/error.hpp"
#include "phi4mm/monte_carlo.hpp"
#include "phi4mm/partition.hpp"
#include "phi4mm/spectra.hpp"
#include "phi4mm/summation.hpp"

namespace phi4mm {

/// Central-difference description of d/dE_i: one step per coordinate, the
/// difference order (2 or 4) and the number of Richardson levels (1 or 2).
struct OperatorStencil {
  std::vector<double> steps;
  int order = 4;
  int richardson_levels = 2;

  /// h_i = min(h_max, gap_i / 10), also keeping E_i - 2 h_i > 0.
  static OperatorStencil for_spectrum(const Spectrum& s, int order = 4, int levels = 2, double h_max = 1e-2) {
    OperatorStencil st;
    st.order = order;
    st.richardson_levels = levels;
    for (std::size_t i = 0; i < s.n(); ++i) st.steps.push_back(std::min({h_max, s.gap_at(i) / 10.0, s.energy(i) / 4.0}));
    return st;
  }

  static OperatorStencil uniform(const Spectrum& s, double h, int order = 4, int levels = 1) {
    return {std::vector<double>(s.n(), h), order, levels};
  }

  /// Widest offset from the centre, in units of h.
  int reach() const { return order == 4 ? 2 : 1; }

  void validate(const Spectrum& s) const {
    if (order != 2 && order != 4) throw ConfigInvalid("stencil.order must be 2 or 4");
    if (richardson_levels != 1 && richardson_levels != 2) throw ConfigInvalid("stencil.richardson_levels must be 1 or 2");
    if (steps.size() != s.n()) throw ConfigInvalid("stencil.steps must have one entry per energy");
    for (std::size_t i = 0; i < s.n(); ++i) {
      const double h = steps[i];
      std::ostringstream os;
      if (!(h > 0.0) || !std::isfinite(h)) {
        os << "stencil step h[" << i << "] = " << h << " must be positive";
        throw StepTooLarge(os.str());
      }
      if (h >= s.gap_at(i) / 2.0) {
        os << "stencil step h[" << i << "] = " << h << " is not below half the gap " << s.gap_at(i);
        throw StepTooLarge(os.str());
      }
      if (s.energy(i) - reach() * h <= 0.0) {
        os << "stencil step h[" << i << "] = " << h << " reaches a non-positive energy";
        throw StepTooLarge(os.str());
      }
    }
  }
};

inline void to_json(nlohmann::json& j, const OperatorStencil& st) {
  j = nlohmann::json{{"steps", st.steps}, {"order", st.order}, {"richardson_levels", st.richardson_levels}};
}

/// A finite linear combination sum_p c_p f(E_p) of point evaluations, all at
/// the coupling of the base spectrum. Points are stored once each.
class PointFunctional {
 public:
  void add(const std::vector<double>& energies, double coefficient) {
    if (coefficient != 0.0) terms_[energies] += coefficient;
  }

  void add(const PointFunctional& other, double scale) {
    for (const auto& [e, c] : other.terms_) add(e, scale * c);
  }

  /// Multiplies each coefficient by m(E_p).
  PointFunctional reweighted(const std::function<double(const std::vector<double>&)>& m) const {
    PointFunctional out;
    for (const auto& [e, c] : terms_) out.add(e, c * m(e));
    return out;
  }

  const std::map<std::vector<double>, double>& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }

 private:
  std::map<std::vector<double>, double> terms_;
};

namespace detail {

inline std::vector<double> shifted(std::vector<double> e, std::size_t i, double d) {
  e[i] += d;
  return e;
}

/// Single-level stencil for the k-th derivative (k = 1, 2) along axis i.
inline PointFunctional axis_derivative_level(const std::vector<double>& e, std::size_t i, int k, int order, double h) {
  PointFunctional p;
  if (order == 2) {
    if (k == 1) {
      p.add(shifted(e, i, h), 0.5 / h);
      p.add(shifted(e, i, -h), -0.5 / h);
    } else {
      p.add(shifted(e, i, h), 1.0 / (h * h));
      p.add(e, -2.0 / (h * h));
      p.add(shifted(e, i, -h), 1.0 / (h * h));
    }
    return p;
  }
  if (k == 1) {
    const double w = 1.0 / (12.0 * h);
    p.add(shifted(e, i, 2 * h), -w);
    p.add(shifted(e, i, h), 8 * w);
    p.add(shifted(e, i, -h), -8 * w);
    p.add(shifted(e, i, -2 * h), w);
  } else {
    const double w = 1.0 / (12.0 * h * h);
    p.add(shifted(e, i, 2 * h), -w);
    p.add(shifted(e, i, h), 16 * w);
    p.add(e, -30 * w);
    p.add(shifted(e, i, -h), 16 * w);
    p.add(shifted(e, i, -2 * h), -w);
  }
  return p;
}

}  // namespace detail

/// k-th partial derivative along axis i, with optional Richardson step halving.
inline PointFunctional axis_derivative(const std::vector<double>& e, std::size_t i, int k, const OperatorStencil& st) {
  const double h = st.steps.at(i);
  const auto coarse = detail::axis_derivative_level(e, i, k, st.order, h);
  if (st.richardson_levels == 1) return coarse;
  const auto fine = detail::axis_derivative_level(e, i, k, st.order, h / 2);
  const double r = std::pow(2.0, st.order);
  PointFunctional p;
  p.add(fine, r / (r - 1.0));
  p.add(coarse, -1.0 / (r - 1.0));
  return p;
}

/// (eta/N) sum d_i^2 + (eta/N) sum_{i!=j} (d_i - d_j)/(E_i - E_j) - 2 sum E_k d_k - N^2.
inline PointFunctional lsd_functional(const Spectrum& s, const OperatorStencil& st) {
  st.validate(s);
  const auto& e = s.energy_vector();
  const double n = static_cast<double>(s.n()), g = s.eta() / n;
  PointFunctional p;
  p.add(e, -n * n);
  for (std::size_t i = 0; i < s.n(); ++i) {
    double first = -2.0 * e[i];
    for (std::size_t j = 0; j < s.n(); ++j)
      if (j != i) first += 2.0 * g / (e[i] - e[j]);
    p.add(axis_derivative(e, i, 1, st), first);
    p.add(axis_derivative(e, i, 2, st), g);
  }
  return p;
}

/// -(eta/N) sum d_i^2 + (N/eta) sum E_i^2.
inline PointFunctional hho_functional(const Spectrum& s, const OperatorStencil& st) {
  st.validate(s);
  if (!(s.eta() > 0.0)) throw DomainError("H_HO needs eta > 0");
  const auto& e = s.energy_vector();
  const double n = static_cast<double>(s.n());
  PointFunctional p;
  p.add(e, n / s.eta() * s.sum_of_squares());
  for (std::size_t i = 0; i < s.n(); ++i) p.add(axis_derivative(e, i, 2, st), -s.eta() / n);
  return p;
}

/// log|G| and sign of G(E) = exp(-(N/2 eta) sum E^2) Delta(E).
inline std::pair<double, double> log_psi_factor(std::span<const double> e, double eta) {
  if (!(eta > 0.0)) throw DomainError("psi transform needs eta > 0");
  const double n = static_cast<double>(e.size());
  double sq = 0.0;
  for (double x : e) sq += x * x;
  const double v = vandermonde(e);
  return {-n / (2.0 * eta) * sq + std::log(std::abs(v)), v < 0.0 ? -1.0 : 1.0};
}

/// A real function of the spectrum at fixed coupling, applied to point functionals.
class SpectrumFunction {
 public:
  virtual ~SpectrumFunction() = default;

  /// sum_p c_p f(E_p) with the coupling of `base`.
  virtual Estimate apply(const PointFunctional& l, const Spectrum& base) const = 0;
  virtual std::string name() const = 0;
  virtual bool stochastic() const { return false; }

  Estimate evaluate(const Spectrum& s) const {
    PointFunctional p;
    p.add(s.energy_vector(), 1.0);
    return apply(p, s);
  }
};

using SpectrumFunctionPtr = std::shared_ptr<const SpectrumFunction>;

namespace detail {

/// Pointwise deterministic function with an error bound per point.
class PointwiseFunction final : public SpectrumFunction {
 public:
  using Eval = std::function<std::pair<double, double>(const Spectrum&)>;

  PointwiseFunction(std::string name, Eval eval) : name_(std::move(name)), eval_(std::move(eval)) {}

  Estimate apply(const PointFunctional& l, const Spectrum& base) const override {
    CompensatedSum value, bound;
    for (const auto& [e, c] : l.terms()) {
      const auto [v, err] = eval_(base.with_energies(e));
      value += c * v;
      bound += std::abs(c) * err;
    }
    Estimate out;
    out.value = value.value();
    out.error = bound.value();
    out.method = name_;
    out.cost = l.size();
    return out;
  }

  std::string name() const override { return name_; }

 private:
  std::string name_;
  Eval eval_;
};

/// Z from matrix Monte Carlo; every stencil point is evaluated on the same deviates.
class MatrixMcFunction final : public SpectrumFunction {
 public:
  MatrixMcFunction(McConfig config, unsigned workers) : config_(config), workers_(workers) {
    if (!config_.crn) throw CrnRequired("matrix Monte Carlo under a stencil needs common random numbers (crn = true)");
  }

  Estimate apply(const PointFunctional& l, const Spectrum& base) const override {
    struct Node {
      Spectrum s;
      HermitianGaussianProposal proposal;
      double c;
    };
    std::vector<Node> nodes;
    for (const auto& [e, c] : l.terms()) {
      auto s = base.with_energies(e);
      auto prop = HermitianGaussianProposal::for_spectrum(s);
      nodes.push_back({std::move(s), std::move(prop), c});
    }
    if (nodes.empty()) return Estimate{0.0, 0.0, ErrorKind::StandardError, name(), 0, 0};
    if (base.n() > kMaxMonteCarloN) throw DomainError("matrix Monte Carlo: N must be <= 6");
    const std::size_t dim = base.n() * base.n();
    auto draw = [&nodes, z = std::vector<double>(dim)](NormalStream& stream) mutable {
      stream.fill(z);
      double acc = 0.0;
      for (const auto& node : nodes) acc += node.c * matrix_mc_sample(node.s, node.proposal, z);
      return acc;
    };
    auto e = mc_estimate(config_, draw, name(), workers_);
    e.cost *= nodes.size();
    return e;
  }

  std::string name() const override { return "z-matrix-mc-crn"; }
  bool stochastic() const override { return true; }

 private:
  McConfig config_;
  unsigned workers_;
};

/// f multiplied by exp(sign * log|G|) and sign(G)^power, as a reweighting of functionals.
class ConjugatedFunction final : public SpectrumFunction {
 public:
  ConjugatedFunction(SpectrumFunctionPtr inner, bool inverse) : inner_(std::move(inner)), inverse_(inverse) {}

  Estimate apply(const PointFunctional& l, const Spectrum& base) const override {
    const double eta = base.eta();
    const bool inv = inverse_;
    auto e = inner_->apply(l.reweighted([eta, inv](const std::vector<double>& x) {
                             const auto [lg, sg] = log_psi_factor(x, eta);
                             return inv ? sg * std::exp(-lg) : sg * std::exp(lg);
                           }),
                           base);
    e.method = name();
    return e;
  }

  std::string name() const override { return (inverse_ ? "psi-inverse(" : "psi(") + inner_->name() + ")"; }
  bool stochastic() const override { return inner_->stochastic(); }

 private:
  SpectrumFunctionPtr inner_;
  bool inverse_;
};

}  // namespace detail

/// Wraps an exact function of the spectrum (error zero).
inline SpectrumFunctionPtr analytic_function(std::string name, std::function<double(const Spectrum&)> f) {
  return std::make_shared<detail::PointwiseFunction>(
      std::move(name), [f = std::move(f)](const Spectrum& s) { return std::pair{f(s), 0.0}; });
}

inline SpectrumFunctionPtr z_free_function() { return analytic_function("z-free", z_free); }

/// Eigen-quadrature Z on a grid frozen at construction, so the value is a
/// smooth function of E across stencil points.
inline SpectrumFunctionPtr eigen_quadrature_function(QuadGrid grid) {
  return std::make_shared<detail::PointwiseFunction>("z-eigen-quadrature", [grid](const Spectrum& s) {
    const auto z = z_eigen_quadrature(s, grid);
    return std::pair{z.value, z.error};
  });
}

inline SpectrumFunctionPtr eigen_quadrature_function(const Spectrum& at) {
  return eigen_quadrature_function(grid_for_spectrum(at));
}

/// Throws CrnRequired unless config.crn is set.
inline SpectrumFunctionPtr matrix_mc_function(const McConfig& config, unsigned workers = 1) {
  return std::make_shared<detail::MatrixMcFunction>(config, workers);
}

/// Psi = exp(-(N/2 eta) sum E^2) Delta(E) Z.
inline SpectrumFunctionPtr psi_transform(SpectrumFunctionPtr z) {
  return std::make_shared<detail::ConjugatedFunction>(std::move(z), false);
}

inline SpectrumFunctionPtr inverse_psi_transform(SpectrumFunctionPtr psi) {
  return std::make_shared<detail::ConjugatedFunction>(std::move(psi), true);
}

inline Estimate apply_lsd(const SpectrumFunction& f, const Spectrum& at, const OperatorStencil& stencil) {
  return f.apply(lsd_functional(at, stencil), at);
}

inline Estimate apply_hho(const SpectrumFunction& f, const Spectrum& at, const OperatorStencil& stencil) {
  return f.apply(hho_functional(at, stencil), at);
}

/// [G L_SD G^{-1} + H_HO] f at `at`, with G multiplication by exp(-(N/2 eta) sum E^2) Delta(E).
inline Estimate prop31_conjugation_residual(const SpectrumFunction& f, const Spectrum& at,
                                            const OperatorStencil& stencil) {
  const auto [lg0, sg0] = log_psi_factor(at.energies(), at.eta());
  const double eta = at.eta();
  auto conj = lsd_functional(at, stencil).reweighted([&, lg0 = lg0, sg0 = sg0](const std::vector<double>& x) {
    const auto [lg, sg] = log_psi_factor(x, eta);
    return sg0 * sg * std::exp(lg0 - lg);
  });
  conj.add(hho_functional(at, stencil), 1.0);
  return f.apply(conj, at);
}

/// |f| scale for the Schwinger-Dyson residual: N^2 |f|.
inline double sd_normalization(const Spectrum& s, double f) { return static_cast<double>(s.n() * s.n()) * std::abs(f); }

/// Local energy scale for zero-energy residuals: (N/eta) sum E^2 |f|.
inline double ho_normalization(const Spectrum& s, double f) {
  return static_cast<double>(s.n()) / s.eta() * s.sum_of_squares() * std::abs(f);
}

}  // namespace phi4mm
