#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "phi4mm/error.hpp"

namespace phi4mm {

/// One normalized residual and the bound it must stay within.
struct Residual {
  std::string name;
  double value = 0.0;
  double normalization = 1.0;
  double tolerance = 0.0;

  bool within() const { return std::isfinite(value) && std::abs(value) <= tolerance; }
  double severity() const { return std::isfinite(value) ? std::abs(value) / tolerance : HUGE_VAL; }
};

struct VerificationReport {
  std::string check;
  std::string paper_ref;
  nlohmann::json inputs = nlohmann::json::object();
  std::vector<Residual> residuals;
  std::string failure;  // captured error message, empty when the check ran
  double seconds = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::size_t n = 0;
  double eta = 0.0;

  bool pass() const {
    return failure.empty() && std::all_of(residuals.begin(), residuals.end(), [](const auto& r) { return r.within(); });
  }

  /// The residual closest to (or furthest beyond) its tolerance.
  const Residual* worst() const {
    const Residual* w = nullptr;
    for (const auto& r : residuals)
      if (!w || r.severity() > w->severity()) w = &r;
    return w;
  }

  void add(std::string name, double value, double tolerance, double normalization = 1.0) {
    residuals.push_back({std::move(name), value, normalization, tolerance});
  }
};

inline void to_json(nlohmann::json& j, const Residual& r) {
  j = nlohmann::json{{"name", r.name}, {"value", r.value}, {"normalization", r.normalization}, {"tolerance", r.tolerance},
                     {"pass", r.within()}};
}

inline void to_json(nlohmann::json& j, const VerificationReport& r) {
  const auto* w = r.worst();
  j = nlohmann::json{{"check", r.check},
                     {"paper_ref", r.paper_ref},
                     {"inputs", r.inputs},
                     {"residuals", r.residuals},
                     {"residual", w ? w->value : 0.0},
                     {"tolerance", w ? w->tolerance : 0.0},
                     {"pass", r.pass()},
                     {"seconds", r.seconds},
                     {"seed", r.seed},
                     {"config_hash", r.config_hash},
                     {"n", r.n},
                     {"eta", r.eta}};
  if (!r.failure.empty()) j["failure"] = r.failure;
}

/// Reports in a deterministic order: check name, then input fingerprint.
inline void sort_reports(std::vector<VerificationReport>& reports) {
  std::stable_sort(reports.begin(), reports.end(), [](const auto& a, const auto& b) {
    if (a.check != b.check) return a.check < b.check;
    return a.inputs.dump() < b.inputs.dump();
  });
}

namespace detail {

inline std::string format_double(double x) {
  if (!std::isfinite(x)) return "null";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline void write_json(std::string& out, const nlohmann::json& j, int indent, int depth) {
  const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
  const std::string close(static_cast<std::size_t>(indent * depth), ' ');
  switch (j.type()) {
    case nlohmann::json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (const auto& [k, v] : j.items()) {  // keys iterate in sorted order
        if (!first) out += ",\n";
        first = false;
        out += pad + nlohmann::json(k).dump() + ": ";
        write_json(out, v, indent, depth + 1);
      }
      out += "\n" + close + "}";
      return;
    }
    case nlohmann::json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ",\n";
        out += pad;
        write_json(out, j[i], indent, depth + 1);
      }
      out += "\n" + close + "]";
      return;
    }
    case nlohmann::json::value_t::number_float:
      out += format_double(j.get<double>());
      return;
    default:
      out += j.dump();
  }
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += (c == '"') ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

}  // namespace detail

/// Stable JSON text: sorted keys, two-space indent, floats at 17 significant digits.
inline std::string stable_json(const nlohmann::json& j) {
  std::string out;
  detail::write_json(out, j, 2, 0);
  out += "\n";
  return out;
}

inline const char* kCsvHeader = "check,paper_ref,n,eta,residual,tolerance,pass,seconds,seed\n";

inline std::string csv_row(const VerificationReport& r) {
  const auto* w = r.worst();
  std::string row = detail::csv_field(r.check) + "," + detail::csv_field(r.paper_ref) + "," + std::to_string(r.n) + "," +
                    detail::format_double(r.eta) + "," + detail::format_double(w ? w->value : 0.0) + "," +
                    detail::format_double(w ? w->tolerance : 0.0) + "," + (r.pass() ? "true" : "false") + "," +
                    detail::format_double(r.seconds) + "," + std::to_string(r.seed) + "\n";
  return row;
}

inline std::string reports_csv(const std::vector<VerificationReport>& reports) {
  std::string out = kCsvHeader;
  for (const auto& r : reports) out += csv_row(r);
  return out;
}

inline std::string reports_json(const std::vector<VerificationReport>& reports) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : reports) arr.push_back(r);
  return stable_json(arr);
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text, bool append = false) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream f(path, append ? std::ios::app : std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw IoError("failed writing " + path.string());
}

enum class ReportFormat { Json, Csv, Both };

inline ReportFormat report_format_from_string(const std::string& s) {
  if (s == "json") return ReportFormat::Json;
  if (s == "csv") return ReportFormat::Csv;
  if (s == "both") return ReportFormat::Both;
  throw ConfigInvalid("format must be json, csv or both (got '" + s + "')");
}

/// Writes reports.json and/or reports.csv under dir.
inline void emit_report(const std::vector<VerificationReport>& reports, ReportFormat format,
                        const std::filesystem::path& dir) {
  if (format != ReportFormat::Csv) write_text_file(dir / "reports.json", reports_json(reports));
  if (format != ReportFormat::Json) write_text_file(dir / "reports.csv", reports_csv(reports));
}

}  // namespace phi4mm
