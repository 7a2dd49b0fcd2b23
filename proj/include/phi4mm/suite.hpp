#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "phi4mm/config.hpp"
#include "phi4mm/hciz.hpp"
#include "phi4mm/operators.hpp"
#include "phi4mm/partition.hpp"
#include "phi4mm/perturbation.hpp"
#include "phi4mm/report.hpp"
#include "phi4mm/weber.hpp"

namespace phi4mm {

namespace checks {

/// Runs `body` on a fresh report; any exception is recorded as the report's failure.
template <class Body>
VerificationReport guarded(const RunConfig& cfg, std::string check, std::string ref, nlohmann::json inputs,
                           Body&& body) {
  VerificationReport r;
  r.check = check;
  r.paper_ref = ref;
  r.inputs = std::move(inputs);
  const auto start = std::chrono::steady_clock::now();
  try {
    body(r);
  } catch (const std::exception& e) {
    r.failure = e.what();
  }
  // bodies may replace the whole report
  r.check = std::move(check);
  if (!ref.empty()) r.paper_ref = std::move(ref);
  r.seed = cfg.mc.seed;
  if (cfg.timing) r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  r.config_hash = config_hash(r.inputs);
  return r;
}

inline void set_spectrum(VerificationReport& r, const Spectrum& s) {
  r.n = s.n();
  r.eta = s.eta();
}

/// Desk-scale cases for the zero-energy checks: (route, spectrum).
struct ZeroEnergyCase {
  std::string route;
  Spectrum spectrum;
};

inline std::vector<ZeroEnergyCase> zero_energy_cases() {
  return {{"eigen-quadrature", Spectrum({1.3}, 0.8)},
          {"eigen-quadrature", Spectrum({1.0, 2.0}, 0.5)},
          {"matrix-mc", Spectrum({1.0, 2.0}, 0.5)},
          {"matrix-mc", Spectrum({1.0, 1.6, 2.3}, 0.5)}};
}

/// Schwinger-Dyson (`ho == false`) or zero-energy (`ho == true`) residual of computed Z.
inline std::vector<VerificationReport> zero_energy(const RunConfig& cfg, bool ho) {
  std::vector<VerificationReport> out;
  for (const auto& c : zero_energy_cases()) {
    const auto& s = c.spectrum;
    const auto stencil = cfg.stencil.for_spectrum(s);
    nlohmann::json inputs{{"spectrum", s}, {"route", c.route}, {"stencil", stencil}};
    if (c.route == "matrix-mc")
      inputs["mc"] = cfg.mc;
    else
      inputs["grid"] = cfg.grid.for_spectrum(s);
    out.push_back(guarded(
        cfg, ho ? "ho" : "sd",
        ho ? "zero-energy Schroedinger equation H_HO Psi = 0" : "Schwinger-Dyson equation L_SD Z = 0 on computed Z",
        inputs, [&](VerificationReport& r) {
          set_spectrum(r, s);
          SpectrumFunctionPtr z = c.route == "matrix-mc" ? matrix_mc_function(cfg.mc, 1)
                                                         : eigen_quadrature_function(cfg.grid.for_spectrum(s));
          if (ho) z = psi_transform(z);
          const auto value = z->evaluate(s);
          const auto op = ho ? apply_hho(*z, s, stencil) : apply_lsd(*z, s, stencil);
          const double norm = ho ? ho_normalization(s, value.value) : sd_normalization(s, value.value);
          r.inputs["operator_value"] = op.value;
          r.inputs["operator_error"] = op.error;
          r.inputs["function_value"] = value.value;
          if (op.stochastic()) {
            r.inputs["normalized_residual"] = op.value / norm;
            r.add("sigmas", op.value / op.error, cfg.tolerance("sigmas"), op.error);
          } else {
            const std::string key = s.n() == 1 ? "zero-energy-n1" : "zero-energy-quadrature";
            r.add("normalized_residual", op.value / norm, cfg.tolerance(key), norm);
          }
        }));
  }
  return out;
}

/// P(E) exp(-a sum E^2) with P a product of random positive quadratics.
inline SpectrumFunctionPtr poly_gauss_function(std::mt19937_64& rng, std::size_t n, nlohmann::json& description) {
  std::uniform_real_distribution<double> u(0.2, 1.0);
  std::vector<std::array<double, 3>> coef(n);
  for (auto& c : coef)
    for (double& x : c) x = u(rng);
  const double a = 0.1 * u(rng);
  description = {{"coefficients", coef}, {"gauss", a}};
  return analytic_function("poly-gauss", [coef, a](const Spectrum& s) {
    double p = 1.0;
    for (std::size_t i = 0; i < s.n(); ++i) {
      const double e = s.energy(i);
      p *= coef[i][0] + coef[i][1] * e + coef[i][2] * e * e;
    }
    return p * std::exp(-a * s.sum_of_squares());
  });
}

inline std::vector<VerificationReport> prop31(const RunConfig& cfg) {
  std::vector<VerificationReport> out;
  std::mt19937_64 rng(cfg.mc.seed);
  std::uniform_real_distribution<double> pick(0.5, 2.5);
  for (int k = 0; k < 20; ++k) {
    const std::size_t n = 1 + k % 3;
    const double eta = k % 2 ? 0.5 : 1.0;
    std::vector<double> e;
    while (true) {
      e.assign(n, 0.0);
      for (double& x : e) x = pick(rng);
      if (Spectrum(e, eta).min_gap() > 0.2) break;
    }
    const Spectrum s(e, eta);
    nlohmann::json fdesc;
    const auto f = poly_gauss_function(rng, n, fdesc);
    const auto stencil = cfg.stencil.for_spectrum(s);
    out.push_back(guarded(cfg, "prop31", "conjugation of L_SD into -H_HO",
                          {{"spectrum", s}, {"test_function", fdesc}, {"stencil", stencil}, {"index", k}},
                          [&](VerificationReport& r) {
                            set_spectrum(r, s);
                            const double norm = ho_normalization(s, f->evaluate(s).value);
                            const double res = prop31_conjugation_residual(*f, s, stencil).value;
                            r.add("normalized_residual", res / norm, cfg.tolerance("prop31"), norm);
                            // fixed protocol: plain 4th-order differences at h and h/2
                            const double r1 = prop31_conjugation_residual(*f, s, OperatorStencil::uniform(s, 0.04, 4, 1)).value;
                            const double r2 = prop31_conjugation_residual(*f, s, OperatorStencil::uniform(s, 0.02, 4, 1)).value;
                            const double order = std::log2(std::abs(r1 / r2));
                            r.inputs["observed_order"] = order;
                            r.add("order_deviation", order - 4.0, cfg.tolerance("prop31-order"));
                          }));
  }
  return out;
}

inline std::vector<VerificationReport> perturbative_sd(const RunConfig& cfg) {
  std::vector<VerificationReport> out;
  for (const auto& s : cfg.battery()) {
    out.push_back(guarded(cfg, "perturbative-sd", "perturbative Schwinger-Dyson identity, orders eta^0 and eta^1", {{"spectrum", s}}, [&](VerificationReport& r) {
      set_spectrum(r, s);
      auto rep = sd_check_first_order(s, cfg.tolerance("perturbative-sd"));
      r.residuals = rep.residuals;
      r.inputs.update(rep.inputs);
    }));
  }
  return out;
}

inline std::vector<VerificationReport> lemma42(const RunConfig& cfg) {
  std::vector<VerificationReport> out;
  for (const auto& s : {Spectrum({1.3}, 0.8), Spectrum({1.0, 2.0}, 0.5)}) {
    const auto grid = cfg.grid.for_spectrum(s);
    out.push_back(guarded(cfg, "lemma42", "eigenvalue integrand total-derivative identity",
                          {{"spectrum", s}, {"grid", grid}}, [&](VerificationReport& r) {
                            set_spectrum(r, s);
                            const auto e = lemma42_residual(s, grid);
                            r.inputs["error_bound"] = e.error;
                            r.add("normalized_residual", e.value, cfg.tolerance(s.n() == 1 ? "lemma42-n1" : "lemma42-pv"));
                          }));
  }
  return out;
}

inline std::vector<VerificationReport> hciz(const RunConfig& cfg) {
  std::vector<VerificationReport> out;
  for (std::size_t n : {2u, 3u}) {
    const auto battery = default_hciz_battery(n);
    nlohmann::json inst = nlohmann::json::array();
    for (const auto& h : battery) inst.push_back(h);
    auto r = guarded(cfg, "hciz", "HCIZ determinant formula, normalization ratio constancy",
                     {{"instances", inst}, {"mc", cfg.mc}}, [&](VerificationReport& rep) {
                       rep = hciz_ratio_check(battery, cfg.mc, cfg.tolerance("sigmas"));
                     });
    r.n = n;
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<VerificationReport> pfaffian_route(const RunConfig& cfg) {
  std::vector<VerificationReport> out;
  const std::string ref = "Pfaffian form of the eigenvalue integral";
  for (double eta : {0.0, 0.5}) {
    const Spectrum s({1.0, 2.0}, eta);
    const auto grid = cfg.grid.for_spectrum(s);
    out.push_back(guarded(cfg, "pfaffian", ref, {{"spectrum", s}, {"grid", grid}, {"against", "eigen-quadrature"}},
                          [&](VerificationReport& r) {
                            set_spectrum(r, s);
                            const auto p = z_pfaffian(s, grid);
                            const auto q = z_eigen_quadrature(s, grid);
                            r.inputs["pfaffian"] = p.value;
                            r.inputs["eigen_quadrature"] = q.value;
                            r.add("relative_difference", (p.value - q.value) / q.value, cfg.tolerance("pfaffian-relative"));
                          }));
  }
  const Spectrum s4({0.9, 1.4, 2.0, 2.7}, 0.3);
  const auto grid4 = cfg.grid.for_spectrum(s4);
  out.push_back(guarded(cfg, "pfaffian", ref, {{"spectrum", s4}, {"grid", grid4}, {"mc", cfg.mc}, {"against", "matrix-mc"}},
                        [&](VerificationReport& r) {
                          set_spectrum(r, s4);
                          const auto p = z_pfaffian(s4, grid4);
                          const auto m = z_matrix_mc(s4, cfg.mc);
                          r.inputs["pfaffian"] = p.value;
                          r.inputs["matrix_mc"] = m.value;
                          const double sigma = std::hypot(p.error, m.error);
                          r.add("sigmas", (p.value - m.value) / sigma, cfg.tolerance("sigmas"), sigma);
                        }));
  const Spectrum f4({0.9, 1.4, 2.0, 2.7}, 0.0);
  out.push_back(guarded(cfg, "pfaffian", ref, {{"spectrum", f4}, {"grid", grid4}, {"against", "z-free"}},
                        [&](VerificationReport& r) {
                          set_spectrum(r, f4);
                          const auto p = z_pfaffian(f4, grid4);
                          r.inputs["pfaffian"] = p.value;
                          r.inputs["z_free"] = z_free(f4);
                          r.inputs["error_bound"] = p.error;
                          // compared at the PV grid tolerance
                          r.add("relative_difference", (p.value - z_free(f4)) / z_free(f4), cfg.grid.tolerance);
                        }));
  return out;
}

inline std::vector<VerificationReport> weber(const RunConfig& cfg) {
  return {guarded(cfg, "weber", "N=1 Weber equation: quadrature, series and Bessel K_{1/4} forms", {}, [&](VerificationReport& r) {
    r = weber_check({0.5, 1.0, 2.0}, cfg.tolerance("weber"), cfg.tolerance("weber"));
  })};
}

inline Eigen::MatrixXcd random_hermitian(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> g;
  Eigen::MatrixXcd h(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    h(k, k) = g(rng);
    for (Eigen::Index l = k + 1; l < n; ++l) {
      h(k, l) = {g(rng), g(rng)};
      h(l, k) = std::conj(h(k, l));
    }
  }
  return h;
}

inline nlohmann::json matrix_json(const Eigen::MatrixXcd& h) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index k = 0; k < h.rows(); ++k) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index l = 0; l < h.cols(); ++l) row.push_back({h(k, l).real(), h(k, l).imag()});
    rows.push_back(row);
  }
  return rows;
}

inline std::vector<VerificationReport> eigen_derivative_check(const RunConfig& cfg) {
  std::vector<VerificationReport> out;
  std::mt19937_64 rng(cfg.mc.seed);
  const double d = 1e-5;
  for (int trial = 0; trial < 9; ++trial) {
    const Eigen::Index n = 2 + trial % 3;
    const auto h = random_hermitian(rng, n);
    out.push_back(guarded(cfg, "eigen-derivative", "eigenvalue derivative by the characteristic-polynomial minor",
                          {{"matrix", matrix_json(h)}, {"fd_step", d}}, [&](VerificationReport& r) {
                            r.n = static_cast<std::size_t>(n);
                            double worst = 0.0;
                            for (Eigen::Index j = 0; j < n; ++j)
                              for (Eigen::Index k = 0; k < n; ++k)
                                for (Eigen::Index i = 0; i < n; ++i) {
                                  const auto exact = eigen_derivative(h, j, k, i);
                                  auto shifted = [&](std::complex<double> dir, double s) {
                                    Eigen::MatrixXcd m = h;
                                    m(k, i) += s * dir;
                                    if (k != i) m(i, k) += s * std::conj(dir);
                                    return hermitian_eigenvalues(m)[j];
                                  };
                                  std::complex<double> fd;
                                  if (k == i) {
                                    fd = (shifted(1.0, d) - shifted(1.0, -d)) / (2 * d);
                                  } else {
                                    const double dre = (shifted({1, 0}, d) - shifted({1, 0}, -d)) / (2 * d);
                                    const double dim = (shifted({0, 1}, d) - shifted({0, 1}, -d)) / (2 * d);
                                    fd = {0.5 * dre, -0.5 * dim};
                                  }
                                  worst = std::max(worst, std::abs(exact - fd) / std::max(1.0, std::abs(fd)));
                                }
                            r.add("max_relative_difference", worst, cfg.tolerance("eigen-derivative"));
                          }));
  }
  return out;
}

inline std::vector<VerificationReport> laplacian_identity(const RunConfig& cfg) {
  std::vector<VerificationReport> out;
  std::mt19937_64 rng(cfg.mc.seed);
  std::normal_distribution<double> g;
  auto power_sum = [](std::span<const double> e, int k) {
    double s = 0.0;
    for (double x : e) s += std::pow(x, k);
    return s;
  };
  for (int trial = 0; trial < 12; ++trial) {
    const Eigen::Index n = 2 + trial % 2;
    const auto h = random_hermitian(rng, n);
    std::array<double, 7> c;
    for (double& x : c) x = g(rng);
    const SymmetricFunction f = [c, power_sum](std::span<const double> e) {
      const double p1 = power_sum(e, 1), p2 = power_sum(e, 2), p3 = power_sum(e, 3), p4 = power_sum(e, 4);
      return c[0] * p1 + c[1] * p2 + c[2] * p1 * p1 + c[3] * p3 + c[4] * p4 + c[5] * p2 * p2 / 4 + c[6] * p1 * p3;
    };
    out.push_back(guarded(cfg, "laplacian-identity", "matrix Laplacian rewritten in eigenvalues",
                          {{"matrix", matrix_json(h)}, {"power_sum_coefficients", c}}, [&](VerificationReport& r) {
                            r.n = static_cast<std::size_t>(n);
                            const double eig = matrix_laplacian_on_symmetric(f, h);
                            const double entry = entry_space_laplacian(f, h, 1e-4);
                            r.inputs["eigenvalue_form"] = eig;
                            r.inputs["entry_form"] = entry;
                            const double norm = std::max(1.0, std::abs(entry));
                            r.add("relative_difference", (eig - entry) / norm, cfg.tolerance("laplacian-identity"), norm);
                          }));
  }
  return out;
}

/// Pairwise route agreement: ratios between routes calibrated at eta = 0 and
/// compared at eta > 0 in units of the combined error.
inline std::vector<VerificationReport> routes(const RunConfig& cfg) {
  std::vector<VerificationReport> out;
  for (const auto& energies : {std::vector<double>{1.2}, std::vector<double>{1.0, 2.0}}) {
    const Spectrum base(energies, 0.0);
    const auto grid = cfg.grid.for_spectrum(base);
    auto compute = [&](double eta) {
      const Spectrum s = base.with_eta(eta);
      std::vector<PartitionEstimate> v{z_matrix_mc(s, cfg.mc), z_eigen_quadrature(s, grid)};
      if (s.n() % 2 == 0) v.push_back(z_pfaffian(s, grid));
      return v;
    };
    for (double eta : {0.1, 1.0}) {
      const Spectrum s = base.with_eta(eta);
      out.push_back(guarded(cfg, "routes", "agreement of matrix, eigenvalue and Pfaffian routes",
                            {{"spectrum", s}, {"grid", grid}, {"mc", cfg.mc}, {"calibration_eta", 0.0}},
                            [&](VerificationReport& r) {
                              set_spectrum(r, s);
                              const auto cal = compute(0.0);
                              const auto now = compute(eta);
                              for (std::size_t a = 0; a < now.size(); ++a)
                                for (std::size_t b = a + 1; b < now.size(); ++b) {
                                  const std::string name = to_string(now[a].route) + "/" + to_string(now[b].route);
                                  const double c = cal[a].value / cal[b].value;
                                  const double ratio = now[a].value / now[b].value;
                                  auto rel = [](const PartitionEstimate& p) { return p.error / std::abs(p.value); };
                                  const double sigma = std::abs(ratio / c) * std::sqrt(rel(now[a]) * rel(now[a]) + rel(now[b]) * rel(now[b]) +
                                                                                       rel(cal[a]) * rel(cal[a]) + rel(cal[b]) * rel(cal[b]));
                                  r.inputs["calibration"][name] = c;
                                  r.inputs["ratio"][name] = ratio;
                                  r.add(name, (ratio / c - 1.0) / sigma, cfg.tolerance("sigmas"), sigma);
                                }
                            }));
    }
  }
  return out;
}

}  // namespace checks

using CheckFn = std::function<std::vector<VerificationReport>(const RunConfig&)>;

inline CheckFn check_function(const std::string& name) {
  if (name == "sd") return [](const RunConfig& c) { return checks::zero_energy(c, false); };
  if (name == "ho") return [](const RunConfig& c) { return checks::zero_energy(c, true); };
  if (name == "prop31") return checks::prop31;
  if (name == "perturbative-sd") return checks::perturbative_sd;
  if (name == "lemma42") return checks::lemma42;
  if (name == "hciz") return checks::hciz;
  if (name == "pfaffian") return checks::pfaffian_route;
  if (name == "weber") return checks::weber;
  if (name == "eigen-derivative") return checks::eigen_derivative_check;
  if (name == "laplacian-identity") return checks::laplacian_identity;
  if (name == "routes") return checks::routes;
  throw ConfigInvalid("suite: unknown check '" + name + "'");
}

struct SuiteResult {
  std::vector<VerificationReport> reports;
  int exit_code = 0;  // 0 when every report passes, 1 otherwise
};

/// Runs the selected checks on up to cfg.workers threads; reports come back
/// in a deterministic order regardless of scheduling.
inline SuiteResult run_suite(const RunConfig& cfg) {
  cfg.validate();
  std::vector<std::string> names;
  for (const auto& n : cfg.suite)
    if (std::find(names.begin(), names.end(), n) == names.end()) names.push_back(n);
  std::vector<std::vector<VerificationReport>> results(names.size());
  auto run = [&](std::size_t i) {
    try {
      results[i] = check_function(names[i])(cfg);
    } catch (const std::exception& e) {
      VerificationReport r;
      r.check = names[i];
      r.failure = e.what();
      r.seed = cfg.mc.seed;
      results[i] = {r};
    }
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(cfg.workers, static_cast<unsigned>(names.size())));
  if (workers <= 1) {
    for (std::size_t i = 0; i < names.size(); ++i) run(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < names.size(); i = next++) run(i);
      });
    for (auto& t : pool) t.join();
  }
  SuiteResult out;
  for (auto& v : results)
    for (auto& r : v) out.reports.push_back(std::move(r));
  sort_reports(out.reports);
  for (const auto& r : out.reports)
    if (!r.pass()) out.exit_code = 1;
  return out;
}

}  // namespace phi4mm
