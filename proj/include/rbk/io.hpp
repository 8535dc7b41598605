#ifndef RBK_IO_HPP
#define RBK_IO_HPP

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rbk/diagnostics.hpp"
#include "rbk/experiments.hpp"
#include "rbk/integrator.hpp"
#include "rbk/kernel.hpp"

namespace rbk {

using json = nlohmann::json;

/// Bumped whenever a column or key changes meaning.
inline constexpr int kFormatVersion = 1;

class output_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw output_error("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  std::ofstream out(path, std::ios::binary);
  out << content;
  out.close();
  if (!out) throw output_error("cannot write " + path.string());
}

/// JSON number, or null for NaN/inf (nlohmann does that on dump as well, but
/// being explicit keeps comparisons of json values sane).
inline json jnum(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

// ---------------------------------------------------------------------------
// CSV: one '#' comment line naming the format and version, then a header.

class CsvTable {
public:
  CsvTable(std::string kind, std::vector<std::string> header)
      : kind_(std::move(kind)), header_(std::move(header)) {}

  CsvTable& row(std::vector<std::string> cells) {
    if (cells.size() != header_.size()) throw contract_violation("csv row width mismatch");
    rows_.push_back(std::move(cells));
    return *this;
  }

  std::string str() const {
    std::ostringstream os;
    os << "# rbk " << kind_ << " v" << kFormatVersion << "\n";
    line(os, header_);
    for (const auto& r : rows_) line(os, r);
    return os.str();
  }

  std::size_t size() const { return rows_.size(); }

private:
  static void line(std::ostringstream& os, const std::vector<std::string>& cells) {
    for (std::size_t k = 0; k < cells.size(); ++k) os << (k ? "," : "") << cells[k];
    os << "\n";
  }
  std::string kind_;
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

inline std::string cell(double x) { return std::isnan(x) ? "nan" : format_real(x); }
inline std::string cell(std::size_t x) { return std::to_string(x); }
inline std::string cell(bool x) { return x ? "true" : "false"; }

/// Long format: one row per (sample, component).
template <typename Real>
CsvTable trajectory_csv(const Trajectory<Real>& traj) {
  CsvTable t("trajectory", {"t", "i", "f_i"});
  for (std::size_t s = 0; s < traj.samples(); ++s)
    for (Index i = 1; i <= traj.n; ++i)
      t.row({cell(traj.times[s]), cell(std::size_t(i)), cell(static_cast<double>(traj.states[s].at(i)))});
  return t;
}

/// Per-sample scalar summaries used for plots.
template <typename Real>
CsvTable moments_csv(const Trajectory<Real>& traj) {
  CsvTable t("moments", {"t", "norm_0", "norm_1", "min_dissipation", "abs_derivative"});
  for (std::size_t s = 0; s < traj.samples(); ++s) {
    double n0 = 0.0;
    for (Index i = 1; i <= traj.n; ++i) n0 += static_cast<double>(traj.states[s].at(i));
    t.row({cell(traj.times[s]), cell(n0), cell(static_cast<double>(norm_1(traj.states[s]))),
           cell(static_cast<double>(traj.min_dissipation_integral(s))),
           cell(static_cast<double>(traj.abs_derivative_integral(s)))});
  }
  return t;
}

// ---------------------------------------------------------------------------
// JSON

inline json to_json(const CheckEntry& e) {
  return {{"t", jnum(e.t)}, {"m", e.m}, {"lhs", jnum(e.lhs)}, {"bound", jnum(e.bound)},
          {"residual", jnum(e.residual)}};
}

inline json to_json(const DiagnosticReport& r, bool with_entries = true) {
  json j{{"check", r.name}, {"tol", jnum(r.tol)}, {"pass", r.pass}, {"count", r.entries.size()}};
  j["worst"] = r.entries.empty() ? json(nullptr) : to_json(r.worst);
  if (!r.note.empty()) j["note"] = r.note;
  if (with_entries) {
    json e = json::array();
    for (const auto& x : r.entries) e.push_back(to_json(x));
    j["entries"] = std::move(e);
  }
  return j;
}

inline json to_json(const StepStats& s) {
  return {{"accepted", s.accepted},
          {"rejected", s.rejected},
          {"negativity_rejections", s.negativity_rejections},
          {"rhs_evaluations", s.rhs_evaluations},
          {"clamp_events", s.clamp_events},
          {"clamped_mass", jnum(s.clamped_mass)},
          {"min_step", jnum(s.min_step)},
          {"max_step", jnum(s.max_step)},
          {"richardson_error", jnum(s.richardson_error)}};
}

/// Metadata and accumulators; the states themselves go to the CSV.
template <typename Real>
json trajectory_json(const Trajectory<Real>& traj) {
  json j{{"format", "rbk-trajectory"}, {"version", kFormatVersion}, {"n", traj.n},
         {"kernel", traj.kernel_id}, {"times", traj.times}, {"weights", traj.weight_names},
         {"steps", traj.step_times.empty() ? 0 : traj.step_times.size() - 1},
         {"stats", to_json(traj.stats)}};
  json acc = json::array();
  for (std::size_t s = 0; s < traj.samples(); ++s) {
    json row{{"t", traj.times[s]},
             {"min_dissipation", jnum(static_cast<double>(traj.min_dissipation_integral(s)))},
             {"abs_derivative", jnum(static_cast<double>(traj.abs_derivative_integral(s)))}};
    json w = json::object();
    for (std::size_t k = 0; k < traj.weight_names.size(); ++k)
      w[traj.weight_names[k]] = {jnum(static_cast<double>(traj.weight_lower(s, k))),
                                 jnum(static_cast<double>(traj.weight_diag(s, k)))};
    row["weight_lower_diag"] = std::move(w);
    acc.push_back(std::move(row));
  }
  j["accumulators"] = std::move(acc);
  return j;
}

inline json to_json(const ConvergenceTable& t) {
  json rows = json::array();
  for (std::size_t w = 0; w < t.watch.size(); ++w)
    for (std::size_t p = 0; p < t.pairs(); ++p)
      rows.push_back({{"i", t.watch[w]}, {"n", t.n_list[p]}, {"n_next", t.n_list[p + 1]},
                      {"sup_diff", jnum(t.sup_diff[w][p])},
                      {"discarded_tail", jnum(t.discarded_tail[p])}});
  return {{"kernel", t.kernel_id},           {"ic", t.ic_id},
          {"precision", t.precision},        {"n_list", t.n_list},
          {"watch", t.watch},                {"sample_times", t.sample_times},
          {"discarded_tail", t.discarded_tail}, {"failure", t.failure},
          {"differences", std::move(rows)},  {"anomalies", t.anomalies},
          {"schedule_n", t.schedule_n},      {"schedule_steps", t.schedule_steps},
          {"complete", t.complete()},        {"strictly_decreasing", t.strictly_decreasing()}};
}

inline json to_json(const StressOutcome& o) {
  json reps = json::array();
  for (const auto& r : o.reports) reps.push_back(to_json(r, false));
  return {{"alpha", o.alpha},
          {"completed", o.completed},
          {"failure", o.failure},
          {"time_reached", jnum(o.time_reached)},
          {"finite", o.finite},
          {"norm_nonincreasing", o.norm_nonincreasing},
          {"max_norm_increase", jnum(o.max_norm_increase)},
          {"stats", to_json(o.stats)},
          {"checks", std::move(reps)},
          {"pass", o.pass()}};
}

inline json to_json(const StabilityReport& r) {
  json cases = json::array();
  for (const auto& c : r.cases) {
    json j{{"delta", c.delta},
           {"distance", json::array()},
           {"bound", json::array()},
           {"check", to_json(c.report, false)},
           {"pass", c.pass(r.linear_tol)}};
    for (double d : c.distance) j["distance"].push_back(jnum(d));
    for (double b : c.bound) j["bound"].push_back(jnum(b));
    j["linearity_error"] = c.linearity_error ? jnum(*c.linearity_error) : json(nullptr);
    cases.push_back(std::move(j));
  }
  return {{"kernel", r.kernel_id},        {"times", r.times},
          {"growth_rate", jnum(r.growth_rate)}, {"linear_tol", r.linear_tol},
          {"cases", std::move(cases)},    {"pass", r.pass()}};
}

/// Accuracy part only; timings are returned by bench_timing_json so the
/// deterministic report can keep them apart.
inline json to_json(const BenchReport& r) {
  json rows = json::array();
  for (const auto& x : r.rows) rows.push_back({{"n", x.n}, {"max_rel_error", jnum(x.max_rel_error)}});
  return {{"kernel", r.kernel_id}, {"repetitions", r.repetitions},
          {"agreement_tol", r.agreement_tol}, {"rows", std::move(rows)}};
}

inline json bench_timing_json(const BenchReport& r) {
  json rows = json::array();
  for (const auto& x : r.rows)
    rows.push_back({{"n", x.n}, {"naive_median_s", jnum(x.naive_median)},
                    {"fast_median_s", jnum(x.fast_median)}, {"ratio", jnum(x.ratio())}});
  return {{"rows", std::move(rows)},
          {"naive_exponent", jnum(r.naive_exponent)},
          {"fast_exponent", jnum(r.fast_exponent)},
          {"ratio_strictly_increasing", r.ratio_strictly_increasing()}};
}

/// Stable text form: sorted keys (json objects are ordered maps), 2-space indent.
inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// aligned text

inline std::string text_table(const std::vector<std::string>& header,
                              const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size(), 0);
  auto widen = [&](const std::vector<std::string>& r) {
    for (std::size_t k = 0; k < r.size() && k < width.size(); ++k)
      width[k] = std::max(width[k], r[k].size());
  };
  widen(header);
  for (const auto& r : rows) widen(r);
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& r) {
    std::string s;
    for (std::size_t k = 0; k < r.size(); ++k) {
      s += r[k];
      if (k + 1 < r.size()) s += std::string(width[k] - r[k].size() + 2, ' ');
    }
    os << s << "\n";
  };
  line(header);
  std::size_t total = 0;
  for (std::size_t k = 0; k < width.size(); ++k) total += width[k] + (k + 1 < width.size() ? 2 : 0);
  os << std::string(total, '-') << "\n";
  for (const auto& r : rows) line(r);
  return os.str();
}

inline std::string short_real(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os.precision(4);
  os << x;
  return os.str();
}

inline std::string diagnostics_text(const std::vector<DiagnosticReport>& reports) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : reports) {
    const bool any = !r.entries.empty();
    rows.push_back({r.name, short_real(r.tol), any ? short_real(r.worst.residual) : "-",
                    any ? short_real(r.worst.t) : "-",
                    any && r.worst.m ? std::to_string(r.worst.m) : "-", std::to_string(r.entries.size()),
                    r.pass ? "PASS" : "FAIL"});
  }
  return text_table({"check", "tol", "worst residual", "at t", "m", "entries", "verdict"}, rows);
}

} // namespace rbk

#endif // RBK_IO_HPP
