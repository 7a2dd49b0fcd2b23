// Command-line front end: one subcommand per check plus run-all.
#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "phi4mm/phi4mm.hpp"

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitConfig = 2;

struct Overrides {
  std::string config_path;
  std::vector<std::string> suite;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<unsigned> workers;
  std::string format;
  bool timing = false;
};

const std::map<std::string, std::string>& subcommand_checks() {
  static const std::map<std::string, std::string> m = {{"verify-sd", "sd"},
                                                       {"verify-ho", "ho"},
                                                       {"verify-prop31", "prop31"},
                                                       {"verify-perturbative", "perturbative-sd"},
                                                       {"verify-lemma42", "lemma42"},
                                                       {"verify-hciz", "hciz"},
                                                       {"verify-pfaffian", "pfaffian"},
                                                       {"verify-weber", "weber"},
                                                       {"verify-eigen-derivative", "eigen-derivative"},
                                                       {"verify-laplacian-identity", "laplacian-identity"},
                                                       {"verify-routes", "routes"}};
  return m;
}

phi4mm::RunConfig build_config(const Overrides& o) {
  phi4mm::RunConfig c = o.config_path.empty() ? phi4mm::RunConfig{} : phi4mm::load_run_config(o.config_path);
  if (!o.suite.empty()) c.suite = o.suite;
  if (o.seed) c.mc.seed = *o.seed;
  if (const char* env = std::getenv("PHI4MM_OUT"); env && *env) c.out_dir = env;
  if (!o.out.empty()) c.out_dir = o.out;
  if (o.workers) c.workers = *o.workers;
  if (!o.format.empty()) c.format = phi4mm::report_format_from_string(o.format);
  if (o.timing) c.timing = true;
  c.validate();
  return c;
}

void print_summary(const std::vector<phi4mm::VerificationReport>& reports, std::ostream& os) {
  std::size_t passed = 0;
  for (const auto& r : reports) {
    const auto* w = r.worst();
    os << (r.pass() ? "PASS " : "FAIL ") << r.check << " n=" << r.n << " eta=" << r.eta;
    if (w) os << " " << w->name << "=" << w->value << " (tol " << w->tolerance << ")";
    if (!r.failure.empty()) os << " error: " << r.failure;
    os << "\n";
    passed += r.pass();
  }
  os << passed << "/" << reports.size() << " reports passed\n";
}

int run_checks(phi4mm::RunConfig config, std::ostream& os) {
  const auto result = phi4mm::run_suite(config);
  phi4mm::emit_report(result.reports, config.format, config.out_dir);
  if (std::find(config.suite.begin(), config.suite.end(), "weber") != config.suite.end())
    phi4mm::write_text_file(std::filesystem::path(config.out_dir) / "weber_table.csv",
                            phi4mm::weber_csv(phi4mm::weber_table({0.5, 1.0, 2.0})));
  print_summary(result.reports, os);
  os << "reports written to " << config.out_dir << "\n";
  return result.exit_code == 0 ? kExitPass : kExitFail;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) out.push_back(std::stod(item));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical verification of the phi^4 matrix model identities"};
  app.require_subcommand(1);
  app.fallthrough();

  Overrides o;
  app.add_option("--config", o.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--suite", o.suite, "check names (run-all only)")->delimiter(',');
  app.add_option("--seed", o.seed, "Monte Carlo seed");
  app.add_option("--out", o.out, "output directory (overrides PHI4MM_OUT)");
  app.add_option("--workers", o.workers, "concurrent checks")->check(CLI::PositiveNumber);
  app.add_option("--format", o.format, "json, csv or both")->check(CLI::IsMember({"json", "csv", "both"}));
  app.add_flag("--timing", o.timing, "record wall time in reports");

  std::string selected;
  for (const auto& [name, check] : subcommand_checks()) {
    app.add_subcommand(name, "run the " + check + " check")->callback([&selected, name = name] { selected = name; });
  }
  app.add_subcommand("run-all", "run the configured suite, or every check")->callback([&] { selected = "run-all"; });

  std::string route = "eigen-quadrature", energies = "1,2";
  double eta = 0.5;
  auto* part = app.add_subcommand("partition", "print one partition-function estimate as JSON");
  part->add_option("--route", route, "matrix-mc, eigen-quadrature, pfaffian or free")
      ->check(CLI::IsMember({"matrix-mc", "eigen-quadrature", "pfaffian", "free"}));
  part->add_option("--energies", energies, "comma-separated external eigenvalues");
  part->add_option("--eta", eta, "quartic coupling");
  part->callback([&] { selected = "partition"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitPass : kExitConfig;
  }

  try {
    auto config = build_config(o);
    if (selected == "partition") {
      const phi4mm::Spectrum s(parse_list(energies), eta);
      const auto p = [&]() -> phi4mm::PartitionEstimate {
        switch (phi4mm::route_from_string(route)) {
          case phi4mm::Route::MatrixMc: return phi4mm::z_matrix_mc(s, config.mc, config.workers);
          case phi4mm::Route::EigenQuadrature: return phi4mm::z_eigen_quadrature(s, config.grid.for_spectrum(s));
          case phi4mm::Route::Pfaffian: return phi4mm::z_pfaffian(s, config.grid.for_spectrum(s));
          case phi4mm::Route::Free: break;
        }
        return {phi4mm::z_free(s), 0.0, phi4mm::Route::Free, s, 0, 0};
      }();
      std::cout << phi4mm::stable_json(p);
      return kExitPass;
    }
    if (selected == "run-all") {
      if (config.suite.empty()) config.suite = phi4mm::check_names();
    } else {
      if (!o.suite.empty()) throw phi4mm::ConfigInvalid("--suite: only valid with run-all");
      config.suite = {subcommand_checks().at(selected)};
    }
    return run_checks(std::move(config), std::cout);
  } catch (const phi4mm::ConfigInvalid& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const phi4mm::InvalidSpectrum& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const phi4mm::DegenerateSpectrum& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument&) {
    std::cerr << "config error: bad number in --energies\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFail;
  }
}
