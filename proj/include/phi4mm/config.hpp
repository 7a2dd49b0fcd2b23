#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "phi4mm/error.hpp"
#include "phi4mm/monte_carlo.hpp"
#include "phi4mm/operators.hpp"
#include "phi4mm/partition.hpp"
#include "phi4mm/report.hpp"
#include "phi4mm/spectra.hpp"

namespace phi4mm {

/// Check names accepted in RunConfig::suite, in canonical order.
inline const std::vector<std::string>& check_names() {
  static const std::vector<std::string> names = {"sd",      "ho",    "prop31", "perturbative-sd",  "lemma42",
                                                 "hciz",    "pfaffian", "weber", "eigen-derivative", "laplacian-identity",
                                                 "routes"};
  return names;
}

inline bool is_check_name(const std::string& s) {
  const auto& n = check_names();
  return std::find(n.begin(), n.end(), s) != n.end();
}

/// Default tolerance per key; every key may be overridden from the config.
inline const std::map<std::string, double>& default_tolerances() {
  static const std::map<std::string, double> t = {
      {"perturbative-sd", 1e-12},     // relative, both orders
      {"prop31", 1e-5},               // normalized conjugation residual
      {"prop31-order", 0.5},          // |observed order - 4|
      {"zero-energy-n1", 1e-6},       // sd and ho, N = 1 quadrature
      {"zero-energy-quadrature", 1e-3},  // sd and ho, N >= 2 eigen quadrature
      {"sigmas", 3.0},                // every Monte Carlo consistency check
      {"lemma42-n1", 1e-6},
      {"lemma42-pv", 1e-3},
      {"pfaffian-relative", 1e-6},    // Pfaffian vs eigen quadrature at N = 2
      {"weber", 1e-8},
      {"eigen-derivative", 1e-6},
      {"laplacian-identity", 1e-4},
  };
  return t;
}

/// Random spectra: N uniform in [n_min, n_max], energies uniform in
/// [energy_min, energy_max], eta cycling through `etas`.
struct BatteryGenerator {
  std::uint64_t seed = 0;
  std::size_t count = 0;
  std::size_t n_min = 1;
  std::size_t n_max = 1;
  double energy_min = 0.5;
  double energy_max = 3.0;
  std::vector<double> etas{1.0};

  std::vector<Spectrum> generate() const {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick_n(n_min, n_max);
    std::uniform_real_distribution<double> pick_e(energy_min, energy_max);
    const double min_gap = 1e-3 * (energy_max - energy_min);
    std::vector<Spectrum> out;
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t n = pick_n(rng);
      while (true) {
        std::vector<double> e(n);
        for (double& x : e) x = pick_e(rng);
        Spectrum s(e, etas[k % etas.size()]);
        if (s.min_gap() > min_gap) {
          out.push_back(std::move(s));
          break;
        }
      }
    }
    return out;
  }
};

struct GridSettings {
  std::size_t nodes = 0;  // 0: per-dimension default
  double pv_epsilon = 1e-3;
  double tolerance = 1e-4;

  QuadGrid for_spectrum(const Spectrum& s) const { return grid_for_spectrum(s, nodes, pv_epsilon, tolerance); }
};

struct StencilSettings {
  int order = 4;
  int richardson_levels = 2;
  double h_max = 1e-2;

  OperatorStencil for_spectrum(const Spectrum& s) const {
    return OperatorStencil::for_spectrum(s, order, richardson_levels, h_max);
  }
};

struct RunConfig {
  std::vector<std::string> suite;
  std::vector<Spectrum> spectra;               // explicit battery
  std::optional<BatteryGenerator> generator;   // appended after the explicit spectra
  McConfig mc;
  GridSettings grid;
  StencilSettings stencil;
  std::map<std::string, double> tolerances = default_tolerances();
  std::string out_dir = "phi4mm-out";
  ReportFormat format = ReportFormat::Both;
  unsigned workers = 1;
  bool timing = false;

  double tolerance(const std::string& key) const { return tolerances.at(key); }

  /// Explicit spectra followed by generated ones; the default battery when both are empty.
  std::vector<Spectrum> battery() const {
    std::vector<Spectrum> out = spectra;
    if (generator) {
      auto g = generator->generate();
      out.insert(out.end(), g.begin(), g.end());
    }
    if (out.empty()) out = BatteryGenerator{20240611, 50, 1, 8, 0.5, 3.0, {0.1, 1.0}}.generate();
    return out;
  }

  void validate() const {
    for (const auto& c : suite)
      if (!is_check_name(c)) throw ConfigInvalid("suite: unknown check '" + c + "'");
    mc.validate();
    if (!(grid.pv_epsilon >= 0.0)) throw ConfigInvalid("grid.pv_epsilon must be >= 0");
    if (!(grid.tolerance > 0.0)) throw ConfigInvalid("grid.tolerance must be > 0");
    if (stencil.order != 2 && stencil.order != 4) throw ConfigInvalid("stencil.order must be 2 or 4");
    if (stencil.richardson_levels != 1 && stencil.richardson_levels != 2)
      throw ConfigInvalid("stencil.richardson_levels must be 1 or 2");
    if (!(stencil.h_max > 0.0)) throw ConfigInvalid("stencil.h_max must be > 0");
    for (const auto& [k, v] : tolerances)
      if (!(v > 0.0)) throw ConfigInvalid("tolerances." + k + " must be > 0");
    if (generator) {
      const auto& g = *generator;
      if (g.n_min < 1 || g.n_max < g.n_min) throw ConfigInvalid("battery.random: need 1 <= n_min <= n_max");
      if (!(g.energy_min > 0.0) || !(g.energy_max > g.energy_min))
        throw ConfigInvalid("battery.random: need 0 < energy_min < energy_max");
      if (g.etas.empty()) throw ConfigInvalid("battery.random.etas must be nonempty");
    }
    if (workers < 1) throw ConfigInvalid("workers must be >= 1");
  }
};

namespace detail {

/// Reads j[key] as T, naming the field in the error.
template <class T>
T field(const nlohmann::json& j, const std::string& key, const std::string& path) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigInvalid(path + key + ": " + e.what());
  }
}

inline void require_object(const nlohmann::json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigInvalid(path + ": expected an object");
}

inline void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& path) {
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw ConfigInvalid(path + k + ": unknown field");
}

}  // namespace detail

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  using detail::field;
  detail::require_object(j, "config");
  detail::reject_unknown(j, {"suite", "battery", "mc", "grid", "stencil", "tolerances", "output", "workers", "timing"}, "");
  RunConfig c;
  if (j.contains("suite")) c.suite = field<std::vector<std::string>>(j, "suite", "");
  if (j.contains("battery")) {
    const auto& b = j.at("battery");
    detail::require_object(b, "battery");
    detail::reject_unknown(b, {"spectra", "random"}, "battery.");
    if (b.contains("spectra")) {
      if (!b.at("spectra").is_array()) throw ConfigInvalid("battery.spectra: expected an array");
      std::size_t i = 0;
      for (const auto& s : b.at("spectra")) {
        try {
          c.spectra.push_back(spectrum_from_json(s));
        } catch (const Error& e) {
          throw ConfigInvalid("battery.spectra[" + std::to_string(i) + "]: " + e.what());
        }
        ++i;
      }
    }
    if (b.contains("random")) {
      const auto& r = b.at("random");
      detail::require_object(r, "battery.random");
      detail::reject_unknown(r, {"seed", "count", "n_min", "n_max", "energy_min", "energy_max", "etas"}, "battery.random.");
      if (!r.contains("seed")) throw ConfigInvalid("battery.random.seed: required");
      BatteryGenerator g;
      g.seed = field<std::uint64_t>(r, "seed", "battery.random.");
      g.count = field<std::size_t>(r, "count", "battery.random.");
      if (r.contains("n_min")) g.n_min = field<std::size_t>(r, "n_min", "battery.random.");
      if (r.contains("n_max")) g.n_max = field<std::size_t>(r, "n_max", "battery.random.");
      if (r.contains("energy_min")) g.energy_min = field<double>(r, "energy_min", "battery.random.");
      if (r.contains("energy_max")) g.energy_max = field<double>(r, "energy_max", "battery.random.");
      if (r.contains("etas")) g.etas = field<std::vector<double>>(r, "etas", "battery.random.");
      c.generator = g;
    }
  }
  if (j.contains("mc")) {
    detail::reject_unknown(j.at("mc"), {"seed", "samples", "batches", "crn"}, "mc.");
    c.mc = mc_config_from_json(j.at("mc"));
  }
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    detail::require_object(g, "grid");
    detail::reject_unknown(g, {"nodes", "pv_epsilon", "tolerance"}, "grid.");
    if (g.contains("nodes")) c.grid.nodes = field<std::size_t>(g, "nodes", "grid.");
    if (g.contains("pv_epsilon")) c.grid.pv_epsilon = field<double>(g, "pv_epsilon", "grid.");
    if (g.contains("tolerance")) c.grid.tolerance = field<double>(g, "tolerance", "grid.");
  }
  if (j.contains("stencil")) {
    const auto& s = j.at("stencil");
    detail::require_object(s, "stencil");
    detail::reject_unknown(s, {"order", "richardson_levels", "h_max"}, "stencil.");
    if (s.contains("order")) c.stencil.order = field<int>(s, "order", "stencil.");
    if (s.contains("richardson_levels")) c.stencil.richardson_levels = field<int>(s, "richardson_levels", "stencil.");
    if (s.contains("h_max")) c.stencil.h_max = field<double>(s, "h_max", "stencil.");
  }
  if (j.contains("tolerances")) {
    const auto& t = j.at("tolerances");
    detail::require_object(t, "tolerances");
    for (const auto& [k, v] : t.items()) {
      if (!default_tolerances().count(k)) throw ConfigInvalid("tolerances." + k + ": unknown tolerance key");
      c.tolerances[k] = field<double>(t, k, "tolerances.");
    }
  }
  if (j.contains("output")) {
    const auto& o = j.at("output");
    detail::require_object(o, "output");
    detail::reject_unknown(o, {"dir", "format"}, "output.");
    if (o.contains("dir")) c.out_dir = field<std::string>(o, "dir", "output.");
    if (o.contains("format")) c.format = report_format_from_string(field<std::string>(o, "format", "output."));
  }
  if (j.contains("workers")) c.workers = field<unsigned>(j, "workers", "");
  if (j.contains("timing")) c.timing = field<bool>(j, "timing", "");
  c.validate();
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigInvalid("config: cannot read " + path.string());
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigInvalid("config: " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

/// Canonical JSON of everything that influences results (output location excluded).
inline nlohmann::json run_config_json(const RunConfig& c) {
  nlohmann::json spectra = nlohmann::json::array();
  for (const auto& s : c.spectra) spectra.push_back(s);
  nlohmann::json j{{"suite", c.suite},
                   {"mc", c.mc},
                   {"grid", {{"nodes", c.grid.nodes}, {"pv_epsilon", c.grid.pv_epsilon}, {"tolerance", c.grid.tolerance}}},
                   {"stencil",
                    {{"order", c.stencil.order}, {"richardson_levels", c.stencil.richardson_levels}, {"h_max", c.stencil.h_max}}},
                   {"tolerances", c.tolerances},
                   {"battery", {{"spectra", spectra}}}};
  if (c.generator) {
    const auto& g = *c.generator;
    j["battery"]["random"] = {{"seed", g.seed},           {"count", g.count},           {"n_min", g.n_min},
                              {"n_max", g.n_max},         {"energy_min", g.energy_min}, {"energy_max", g.energy_max},
                              {"etas", g.etas}};
  }
  return j;
}

}  // namespace phi4mm
