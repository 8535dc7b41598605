// rbk: command-line front end for the truncated annihilation system.
//
// exit codes: 0 all checks pass, 1 a diagnostic failed, 2 bad config or
// unmet precondition, 3 integrator (or other runtime) failure.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rbk/config.hpp"
#include "rbk/diagnostics.hpp"
#include "rbk/experiments.hpp"
#include "rbk/io.hpp"

namespace fs = std::filesystem;
using namespace rbk;

namespace {

enum Exit : int { kPass = 0, kDiagnosticFail = 1, kConfigError = 2, kRuntimeError = 3 };

struct Overrides {
  std::string config;
  std::optional<std::size_t> jobs;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
  bool print_config = false;
};

RunConfig resolve(const Overrides& o) {
  RunConfig cfg = o.config.empty() ? RunConfig::parse("", "defaults") : RunConfig::load(o.config);
  if (o.jobs) cfg.jobs = *o.jobs;
  if (o.out) cfg.output_dir = *o.out;
  if (o.seed) cfg.seed = *o.seed;
  if (o.tol) cfg.diagnostics.tol = *o.tol;
  cfg.validate();
  return cfg;
}

// Common report envelope. Everything outside "timing" must be a pure
// function of the resolved config.
json envelope(const std::string& command, const RunConfig& cfg) {
  return {{"format", "rbk-report"},
          {"version", kFormatVersion},
          {"command", command},
          {"seed", cfg.seed},
          {"kernel", cfg.build_kernel().id()},
          {"ic", cfg.build_ic().id()},
          {"n", cfg.ic.n}};
}

class Stopwatch {
public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void finish(json report, const fs::path& dir, const Stopwatch& clock, const RunConfig& cfg) {
  report["timing"]["wall_seconds"] = clock.seconds();
  report["timing"]["jobs"] = resolve_jobs(cfg.jobs);
  write_file(dir / "report.json", dump(report));
  write_file(dir / "resolved.conf", cfg.to_text());
}

std::vector<DiagnosticReport> evaluate_checks(const RunConfig& cfg, const Trajectory<double>& traj,
                                              const Kernel& kernel,
                                              const std::vector<WeightSequence>& weights) {
  const double tol = cfg.diagnostic_tol();
  const auto m_set = cfg.resolved_m_set();
  std::vector<DiagnosticReport> out;
  for (const auto& name : known_checks()) {
    if (!cfg.check_enabled(name)) continue;
    if (name == "mass_balance") out.push_back(mass_balance_check(traj, tol));
    else if (name == "tail_monotonicity") out.push_back(tail_monotonicity_check(traj, m_set, tol));
    else if (name == "tail_dissipation") out.push_back(tail_dissipation_check(traj, m_set, tol));
    else if (name == "weighted_tail")
      out.push_back(weighted_tail_check(traj, kernel, cfg.bound_sequence(kernel), m_set, tol));
    else if (name == "derivative_l1") out.push_back(derivative_l1_check(traj, tol));
    else if (name == "weight_balance") out.push_back(weight_balance_check(traj, weights, tol));
    else if (name == "weight_monotonicity") out.push_back(weight_monotonicity_check(traj, weights, tol));
  }
  return out;
}

void write_trajectory(const fs::path& dir, const Trajectory<double>& traj) {
  write_file(dir / "trajectory.csv", trajectory_csv(traj).str());
  write_file(dir / "trajectory.json", dump(trajectory_json(traj)));
  write_file(dir / "plotdata" / "moments.csv", moments_csv(traj).str());
}

// run writes the trajectory; check only evaluates and reports.
int cmd_run(const RunConfig& cfg, bool keep_trajectory) {
  Stopwatch clock;
  const fs::path dir = cfg.output_dir;
  const Kernel kernel = cfg.build_kernel();
  const auto f0 = cfg.build_ic().realize(cfg.ic.n);
  const auto weights = cfg.build_weights();
  json report = envelope(keep_trajectory ? "run" : "check", cfg);

  Trajectory<double> traj;
  try {
    traj = integrate(f0, kernel, cfg.integrator, weights, cfg.sample_times());
  } catch (const integration_failure<double>& e) {
    if (keep_trajectory && cfg.write_trajectory) write_trajectory(dir, e.partial());
    report["failure"] = {{"kind", to_string(e.kind())}, {"time", e.time_reached()}, {"message", e.what()}};
    report["pass"] = false;
    finish(report, dir, clock, cfg);
    std::cerr << "integration failed: " << e.what() << "\n";
    return kRuntimeError;
  }
  if (keep_trajectory && cfg.write_trajectory) write_trajectory(dir, traj);

  const auto reports = evaluate_checks(cfg, traj, kernel, weights);
  bool pass = true;
  json checks = json::array();
  for (const auto& r : reports) {
    pass = pass && r.pass;
    checks.push_back(to_json(r));
  }
  report["checks"] = std::move(checks);
  report["stats"] = to_json(traj.stats);
  report["pass"] = pass;
  finish(report, dir, clock, cfg);

  const std::string text = diagnostics_text(reports);
  write_file(dir / "report.txt", text);
  std::cout << text << "verdict: " << (pass ? "PASS" : "FAIL") << "\n";
  return pass ? kPass : kDiagnosticFail;
}

int cmd_converge(const RunConfig& cfg) {
  Stopwatch clock;
  const fs::path dir = cfg.output_dir;
  const auto table = truncation_convergence(cfg.study_config());

  CsvTable csv("convergence", {"i", "n", "n_next", "sup_diff", "discarded_tail_n"});
  std::vector<std::vector<std::string>> rows;
  for (std::size_t w = 0; w < table.watch.size(); ++w)
    for (std::size_t p = 0; p < table.pairs(); ++p) {
      std::vector<std::string> r{cell(std::size_t(table.watch[w])), cell(std::size_t(table.n_list[p])),
                                 cell(std::size_t(table.n_list[p + 1])), cell(table.sup_diff[w][p]),
                                 cell(table.discarded_tail[p])};
      csv.row(r);
      rows.push_back({r[0], r[1], r[2], short_real(table.sup_diff[w][p]),
                      short_real(table.discarded_tail[p])});
    }
  write_file(dir / "table.csv", csv.str());

  CsvTable watched("watched", {"n", "t", "i", "f_i"});
  for (std::size_t k = 0; k < table.n_list.size(); ++k)
    for (std::size_t s = 0; s < table.series[k].size(); ++s)
      for (std::size_t w = 0; w < table.watch.size(); ++w)
        watched.row({cell(std::size_t(table.n_list[k])), cell(table.sample_times[s]),
                     cell(std::size_t(table.watch[w])), cell(table.series[k][s][w])});
  write_file(dir / "plotdata" / "watched.csv", watched.str());

  json report = envelope("converge", cfg);
  report["table"] = to_json(table);
  const bool pass = table.strictly_decreasing();
  report["pass"] = pass;
  finish(report, dir, clock, cfg);

  std::string text = text_table({"i", "n", "n_next", "sup |diff|", "tail(n)"}, rows);
  for (std::size_t k = 0; k < table.failure.size(); ++k)
    if (!table.failure[k].empty())
      text += "n=" + std::to_string(table.n_list[k]) + " failed: " + table.failure[k] + "\n";
  for (Index i : table.anomalies) text += "anomaly: differences at i=" + std::to_string(i) + " do not decrease\n";
  write_file(dir / "report.txt", text);
  std::cout << text << "verdict: " << (pass ? "PASS" : "FAIL") << "\n";
  if (!table.complete()) return kRuntimeError;
  return pass ? kPass : kDiagnosticFail;
}

std::string csv_safe(std::string s) {
  for (auto& c : s)
    if (c == ',' || c == '\n') c = ';';
  return s;
}

int cmd_stress(const RunConfig& cfg) {
  Stopwatch clock;
  const fs::path dir = cfg.output_dir;
  const auto outcomes = growth_stress(cfg.stress_config());

  CsvTable csv("stress", {"alpha", "completed", "time_reached", "finite", "norm_nonincreasing",
                          "max_norm_increase", "pass", "failure"});
  CsvTable norms("stress-norms", {"alpha", "t", "norm_1"});
  std::vector<std::vector<std::string>> rows;
  json list = json::array();
  bool pass = true, completed = true;
  for (const auto& o : outcomes) {
    csv.row({cell(o.alpha), cell(o.completed), cell(o.time_reached), cell(o.finite),
             cell(o.norm_nonincreasing), cell(o.max_norm_increase), cell(o.pass()), csv_safe(o.failure)});
    for (std::size_t s = 0; s < o.times.size(); ++s) norms.row({cell(o.alpha), cell(o.times[s]), cell(o.norm1[s])});
    std::string failed;
    for (const auto& r : o.reports)
      if (!r.pass) failed += (failed.empty() ? "" : " ") + r.name;
    rows.push_back({short_real(o.alpha), o.completed ? "yes" : "no", short_real(o.time_reached),
                    failed.empty() ? "-" : failed, o.pass() ? "PASS" : "FAIL"});
    list.push_back(to_json(o));
    pass = pass && o.pass();
    completed = completed && o.completed;
  }
  write_file(dir / "table.csv", csv.str());
  write_file(dir / "plotdata" / "norms.csv", norms.str());

  json report = envelope("stress", cfg);
  report["outcomes"] = std::move(list);
  report["pass"] = pass;
  finish(report, dir, clock, cfg);

  const std::string text = text_table({"alpha", "completed", "t reached", "failed checks", "verdict"}, rows);
  write_file(dir / "report.txt", text);
  std::cout << text;
  for (const auto& o : outcomes)
    if (!o.failure.empty()) std::cout << "alpha=" << format_real(o.alpha) << ": " << o.failure << "\n";
  std::cout << "verdict: " << (pass ? "PASS" : "FAIL") << "\n";
  if (!completed) return kRuntimeError;
  return pass ? kPass : kDiagnosticFail;
}

int cmd_stability(const RunConfig& cfg) {
  Stopwatch clock;
  const fs::path dir = cfg.output_dir;
  const auto rep = stability_study(cfg.stability_config());

  CsvTable csv("stability", {"delta", "t", "distance", "bound"});
  std::vector<std::vector<std::string>> rows;
  for (const auto& c : rep.cases) {
    for (std::size_t s = 0; s < c.distance.size(); ++s)
      csv.row({cell(c.delta), cell(rep.times[s]), cell(c.distance[s]), cell(c.bound[s])});
    rows.push_back({short_real(c.delta), short_real(c.report.worst.residual),
                    c.linearity_error ? short_real(*c.linearity_error) : "-",
                    c.pass(rep.linear_tol) ? "PASS" : "FAIL"});
  }
  write_file(dir / "table.csv", csv.str());
  write_file(dir / "plotdata" / "distance.csv", csv.str());

  json report = envelope("stability", cfg);
  report["stability"] = to_json(rep);
  report["pass"] = rep.pass();
  finish(report, dir, clock, cfg);

  const std::string text = "growth rate " + short_real(rep.growth_rate) + "\n" +
                           text_table({"delta", "worst residual", "linearity error", "verdict"}, rows);
  write_file(dir / "report.txt", text);
  std::cout << text << "verdict: " << (rep.pass() ? "PASS" : "FAIL") << "\n";
  return rep.pass() ? kPass : kDiagnosticFail;
}

int cmd_bench(const RunConfig& cfg) {
  Stopwatch clock;
  const fs::path dir = cfg.output_dir;
  std::vector<Index> n_list(cfg.bench.n_list.begin(), cfg.bench.n_list.end());
  const auto rep = rhs_benchmark(cfg.build_kernel(), n_list, cfg.bench.repetitions, cfg.seed);

  CsvTable csv("bench", {"n", "max_rel_error", "naive_median_s", "fast_median_s", "ratio"});
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : rep.rows) {
    csv.row({cell(std::size_t(r.n)), cell(r.max_rel_error), cell(r.naive_median), cell(r.fast_median),
             cell(r.ratio())});
    rows.push_back({std::to_string(r.n), short_real(r.max_rel_error), short_real(r.naive_median),
                    short_real(r.fast_median), short_real(r.ratio())});
  }
  write_file(dir / "table.csv", csv.str());
  write_file(dir / "plotdata" / "timing.csv", csv.str());

  json report = envelope("bench", cfg);
  report["bench"] = to_json(rep);
  report["pass"] = true;
  report["timing"]["bench"] = bench_timing_json(rep);
  finish(report, dir, clock, cfg);

  const std::string text = text_table({"n", "max rel error", "naive s", "fast s", "ratio"}, rows) +
                           "naive exponent " + short_real(rep.naive_exponent) + ", fast exponent " +
                           short_real(rep.fast_exponent) + "\n";
  write_file(dir / "report.txt", text);
  std::cout << text << "verdict: PASS\n";
  return kPass;
}

int guarded(const Overrides& o, const std::function<int(const RunConfig&)>& body) {
  try {
    const RunConfig cfg = resolve(o);
    if (o.print_config) {
      std::cout << cfg.to_text();
      return kPass;
    }
    return body(cfg);
  } catch (const contract_violation& e) {
    std::cerr << "check failed: " << e.what() << "\n";
    return kDiagnosticFail;
  } catch (const std::invalid_argument& e) { // configuration_error, precondition_error
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const integration_error& e) {
    std::cerr << "integration failed: " << e.what() << "\n";
    return kRuntimeError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Truncated annihilation system: integrate, check and study"};
  app.require_subcommand(1);
  Overrides o;
  std::function<int(const RunConfig&)> body;

  auto add = [&](const std::string& name, const std::string& help,
                 std::function<int(const RunConfig&)> fn) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", o.config, "key = value config file (defaults when omitted)")
        ->check(CLI::ExistingFile);
    sub->add_option("-j,--jobs", o.jobs, "worker threads, 0 = hardware");
    sub->add_option("-o,--out", o.out, "output directory");
    sub->add_option("--seed", o.seed, "seed for random weights and benchmark data");
    sub->add_option("--tol", o.tol, "diagnostic tolerance");
    sub->add_flag("--print-config", o.print_config, "print the resolved config and exit");
    sub->callback([&body, fn] { body = fn; });
  };
  add("run", "integrate, write the trajectory and evaluate all checks",
      [](const RunConfig& c) { return cmd_run(c, true); });
  add("check", "integrate and evaluate checks without writing the trajectory",
      [](const RunConfig& c) { return cmd_run(c, false); });
  add("converge", "compare watched components across truncation sizes", cmd_converge);
  add("stress", "rapid-growth sum kernels with the standard checks", cmd_stress);
  add("stability", "distance between perturbed solutions against the exponential bound", cmd_stability);
  add("bench", "naive against fast right-hand side for product kernels", cmd_bench);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }
  return guarded(o, body);
}
