// Runs a small configured suite in-process and writes JSON and CSV reports.
#include <cstdio>

#include "phi4mm/phi4mm.hpp"

int main(int argc, char** argv) {
  using namespace phi4mm;
  const auto config = argc > 1 ? load_run_config(argv[1]) : run_config_from_json({{"suite", {"weber", "lemma42"}}});
  const auto result = run_suite(config);
  emit_report(result.reports, config.format, config.out_dir);
  for (const auto& r : result.reports) std::printf("%s %s n=%zu\n", r.pass() ? "PASS" : "FAIL", r.check.c_str(), r.n);
  return result.exit_code;
}
