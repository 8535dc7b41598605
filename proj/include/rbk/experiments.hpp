#ifndef RBK_EXPERIMENTS_HPP
#define RBK_EXPERIMENTS_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "rbk/diagnostics.hpp"
#include "rbk/errors.hpp"
#include "rbk/integrator.hpp"
#include "rbk/kernel.hpp"
#include "rbk/sequence_space.hpp"
#include "rbk/truncation.hpp"
#include "rbk/work_pool.hpp"

namespace rbk {

/// 100 significant decimal digits; used when truncation differences fall
/// below double resolution.
using ExtendedReal = boost::multiprecision::cpp_bin_float_100;

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// `count` equispaced times in (0, t_end]; t_end itself is always included.
inline std::vector<double> uniform_samples(double t_end, std::size_t count) {
  std::vector<double> out;
  for (std::size_t k = 1; k <= count; ++k)
    out.push_back(k == count ? t_end : t_end * double(k) / double(count));
  return out;
}

// ---------------------------------------------------------------------------
// truncation convergence

struct StudyConfig {
  Kernel kernel = Kernel::constant(1.0);
  InitialCondition ic = InitialCondition::geometric(1.0, 0.5);
  IntegratorConfig integrator;
  std::vector<Index> n_list{50, 100, 200, 400};
  std::vector<Index> watch{1, 2, 5};
  std::vector<double> samples; ///< empty: 10 equispaced times up to t_end
  std::size_t jobs = 0;
  bool extended_precision = false;
  std::uint64_t seed = 1;

  void validate() const {
    integrator.validate();
    if (n_list.size() < 2) throw configuration_error("study.n_list needs at least two sizes");
    for (std::size_t k = 0; k < n_list.size(); ++k) {
      if (n_list[k] < 1) throw configuration_error("study.n_list entries must be >= 1");
      if (k > 0 && n_list[k] <= n_list[k - 1])
        throw configuration_error("study.n_list must be strictly increasing");
    }
    if (watch.empty()) throw configuration_error("study.watch must not be empty");
    for (Index i : watch)
      if (i < 1 || i > n_list.front())
        throw configuration_error("study.watch index " + std::to_string(i) +
                                  " outside [1, min(n_list)]");
  }

  std::vector<double> sample_times() const {
    return samples.empty() ? uniform_samples(integrator.t_end, 10) : samples;
  }
};

struct ConvergenceTable {
  std::string kernel_id;
  std::string ic_id;
  std::string precision;
  std::vector<Index> n_list;
  std::vector<Index> watch;
  std::vector<double> sample_times;
  std::vector<double> discarded_tail; ///< sum_{j>n} j f_j^in per n
  std::vector<std::string> failure;   ///< per n, empty when the run succeeded
  /// sup over samples of |f_i^{n_p} - f_i^{n_{p+1}}|, [watch][pair]; NaN when a run failed
  std::vector<std::vector<double>> sup_diff;
  /// watched values f_i^n(t), [n][sample][watch]
  std::vector<std::vector<std::vector<double>>> series;
  std::vector<Index> anomalies; ///< watched indices whose differences do not decrease
  Index schedule_n = 0;
  std::size_t schedule_steps = 0;

  std::size_t pairs() const { return n_list.empty() ? 0 : n_list.size() - 1; }
  bool complete() const {
    return std::all_of(failure.begin(), failure.end(), [](const auto& s) { return s.empty(); });
  }
  /// Largest difference over watched indices for pair p.
  double pair_sup(std::size_t p) const {
    double out = 0.0;
    for (const auto& row : sup_diff) out = std::isnan(row[p]) ? row[p] : std::max(out, row[p]);
    return out;
  }
  bool strictly_decreasing() const { return complete() && anomalies.empty(); }
};

namespace detail {

/// True when d is strictly decreasing, ignoring exact zero-to-zero steps.
inline bool decreasing_sequence(const std::vector<double>& d) {
  for (std::size_t p = 1; p < d.size(); ++p) {
    if (std::isnan(d[p]) || std::isnan(d[p - 1])) return false;
    if (d[p - 1] == 0.0 && d[p] == 0.0) continue;
    if (!(d[p] < d[p - 1])) return false;
  }
  return true;
}

template <typename Real>
std::vector<std::vector<double>> watched_series(const Trajectory<Real>& traj,
                                                const std::vector<Index>& watch) {
  std::vector<std::vector<double>> out(traj.samples());
  for (std::size_t s = 0; s < traj.samples(); ++s)
    for (Index i : watch) out[s].push_back(static_cast<double>(traj.states[s].at(i)));
  return out;
}

template <typename Real>
ConvergenceTable convergence_impl(const StudyConfig& study, const char* precision) {
  study.validate();
  const auto samples = detail::normalize_samples(study.sample_times(), study.integrator.t_end);
  const std::size_t N = study.n_list.size();

  ConvergenceTable table;
  table.kernel_id = study.kernel.id();
  table.ic_id = study.ic.id();
  table.precision = precision;
  table.n_list = study.n_list;
  table.watch = study.watch;
  table.sample_times = samples;
  table.failure.assign(N, "");
  table.series.assign(N, {});
  for (Index n : study.n_list) table.discarded_tail.push_back(study.ic.discarded_tail(n));

  // Every size replays one step schedule, taken from the largest size whose
  // adaptive run succeeds, so the differences carry no step-selection noise.
  std::vector<double> schedule;
  for (std::size_t k = N; k-- > 0 && schedule.empty();) {
    try {
      schedule = integrate(study.ic.realize(study.n_list[k]), study.kernel, study.integrator, {},
                           samples)
                     .step_times;
      table.schedule_n = study.n_list[k];
    } catch (const integration_error& e) {
      table.failure[k] = std::string(to_string(e.kind())) + ": " + e.what();
    }
  }
  table.schedule_steps = schedule.empty() ? 0 : schedule.size() - 1;

  std::vector<std::optional<Trajectory<Real>>> runs(N);
  if (!schedule.empty()) {
    run_pool(N, study.jobs, [&](std::size_t k) {
      if (!table.failure[k].empty()) return;
      try {
        runs[k] = integrate_on_schedule(study.ic.template realize<Real>(study.n_list[k]),
                                        study.kernel, schedule, samples, {},
                                        study.integrator.negativity_threshold());
        table.series[k] = watched_series(*runs[k], study.watch);
      } catch (const integration_error& e) {
        table.failure[k] = std::string(to_string(e.kind())) + ": " + e.what();
      }
    });
  }

  table.sup_diff.assign(study.watch.size(), std::vector<double>(N - 1, kNaN));
  for (std::size_t p = 0; p + 1 < N; ++p) {
    if (!runs[p] || !runs[p + 1]) continue;
    for (std::size_t w = 0; w < study.watch.size(); ++w) {
      const Index i = study.watch[w];
      Real sup(0);
      for (std::size_t s = 0; s < samples.size(); ++s) {
        using std::abs;
        const Real d = abs(runs[p]->states[s].at(i) - runs[p + 1]->states[s].at(i));
        if (d > sup) sup = d;
      }
      table.sup_diff[w][p] = static_cast<double>(sup);
    }
  }
  for (std::size_t w = 0; w < study.watch.size(); ++w)
    if (!decreasing_sequence(table.sup_diff[w])) table.anomalies.push_back(study.watch[w]);
  return table;
}

} // namespace detail

/// Runs the truncated system at every n of the study and compares watched
/// components between consecutive sizes (Cauchy-style, no limit solution).
inline ConvergenceTable truncation_convergence(const StudyConfig& study) {
  if (study.extended_precision) return detail::convergence_impl<ExtendedReal>(study, "extended");
  return detail::convergence_impl<double>(study, "double");
}

// ---------------------------------------------------------------------------
// rapid-growth stress

struct StressOutcome {
  double alpha = 0.0;
  bool completed = false;
  std::string failure;
  double time_reached = 0.0;
  bool finite = true;
  bool norm_nonincreasing = true;
  double max_norm_increase = 0.0; ///< relative to ||f(0)||_1
  std::vector<double> times;
  std::vector<double> norm1; ///< ||f(t)||_1 per sample
  std::vector<DiagnosticReport> reports;
  StepStats stats;

  bool pass() const {
    if (!completed || !finite || !norm_nonincreasing) return false;
    return std::all_of(reports.begin(), reports.end(), [](const auto& r) { return r.pass; });
  }
};

struct StressConfig {
  std::vector<double> alphas{1.5, 2.0, 2.5, 3.0};
  InitialCondition ic = InitialCondition::geometric(1.0, 0.5);
  Index n = 100;
  IntegratorConfig integrator;
  std::optional<double> tol; ///< diagnostic tolerance; default 100 rel_tol
  bool scale_to_unit_mass = true;
  std::vector<double> samples;
  std::size_t jobs = 0;

  double diagnostic_tol() const { return tol ? *tol : 100.0 * integrator.rel_tol; }

  void validate() const {
    integrator.validate();
    if (n < 1) throw configuration_error("stress.n must be >= 1");
    if (alphas.empty()) throw configuration_error("stress.alphas must not be empty");
    for (double a : alphas)
      if (!(a > 1.0 && a <= 3.0))
        throw configuration_error("stress.alphas entry " + format_real(a) + " outside (1, 3]");
  }
};

/// Full diagnostic sweep of one finished trajectory. Used by the stress study
/// and the CLI run command.
inline std::vector<DiagnosticReport> standard_checks(const Trajectory<double>& traj,
                                                     const Kernel& kernel,
                                                     const std::vector<Index>& m_set, double tol) {
  const auto A = dominating_sequence(kernel, traj.n);
  return {mass_balance_check(traj, tol), tail_monotonicity_check(traj, m_set, tol),
          tail_dissipation_check(traj, m_set, tol), weighted_tail_check(traj, kernel, A, m_set, tol),
          derivative_l1_check(traj, tol)};
}

inline StressOutcome stress_one(double alpha, const StressConfig& cfg) {
  StressOutcome out;
  out.alpha = alpha;
  const Kernel kernel = Kernel::sum(alpha);
  const InitialCondition ic = cfg.scale_to_unit_mass ? cfg.ic.scaled_to_mass(1.0) : cfg.ic;
  const auto m_set = log_spaced_indices(cfg.n);
  const auto samples = cfg.samples.empty() ? uniform_samples(cfg.integrator.t_end, 10) : cfg.samples;
  Trajectory<double> traj;
  try {
    traj = integrate(ic.realize(cfg.n), kernel, cfg.integrator, tail_weights(m_set), samples);
    out.completed = true;
    out.time_reached = cfg.integrator.t_end;
  } catch (const integration_failure<double>& e) {
    out.failure = std::string(to_string(e.kind())) + ": " + e.what();
    out.time_reached = e.time_reached();
    out.stats = e.partial().stats;
    return out;
  }
  out.stats = traj.stats;
  const double tol = cfg.diagnostic_tol();
  const double mass0 = norm_1(traj.initial());
  for (std::size_t s = 0; s < traj.samples(); ++s) {
    out.times.push_back(traj.times[s]);
    out.norm1.push_back(norm_1(traj.states[s]));
    for (double v : traj.states[s])
      if (!std::isfinite(v)) out.finite = false;
    if (s > 0) {
      const double rise = (norm_1(traj.states[s]) - norm_1(traj.states[s - 1])) /
                          detail::positive_or_one(mass0);
      out.max_norm_increase = std::max(out.max_norm_increase, rise);
    }
  }
  out.norm_nonincreasing = out.max_norm_increase <= tol;
  out.reports = standard_checks(traj, kernel, m_set, tol);
  return out;
}

/// Sum(alpha) runs for every alpha; RBK stays solvable where coagulation
/// with the same rates would not.
inline std::vector<StressOutcome> growth_stress(const StressConfig& cfg) {
  cfg.validate();
  std::vector<StressOutcome> out(cfg.alphas.size());
  run_pool(out.size(), cfg.jobs, [&](std::size_t k) { out[k] = stress_one(cfg.alphas[k], cfg); });
  return out;
}

// ---------------------------------------------------------------------------
// stability under perturbation

struct StabilityConfig {
  Kernel kernel = Kernel::constant(1.0);
  InitialCondition ic = InitialCondition::geometric(1.0, 0.5);
  Index n = 40;
  double t_end = 2.0;
  std::vector<double> deltas{1e-6, 1e-3};
  Index perturb_index = 1;
  std::optional<BoundSequence> A; ///< default: dominating_sequence(kernel, n)
  double tol = 1e-6;
  double linear_tol = 0.05;
  double reference_tol = 1e-12;
  std::vector<double> samples;
  std::size_t jobs = 0;

  void validate() const {
    if (n < 1) throw configuration_error("stability.n must be >= 1");
    if (!(t_end > 0.0)) throw configuration_error("stability.t_end must be > 0");
    if (perturb_index < 1 || perturb_index > n)
      throw configuration_error("stability.perturb_index outside [1, n]");
    if (deltas.empty()) throw configuration_error("stability.deltas must not be empty");
    for (double d : deltas)
      if (!(d >= 0.0) || !std::isfinite(d))
        throw configuration_error("stability.deltas entries must be finite and >= 0");
  }
};

struct StabilityCase {
  double delta = 0.0;
  DiagnosticReport report;
  std::vector<double> distance; ///< ||E(t)||_A per sample
  std::vector<double> bound;
  /// max over t > 0 of |E_delta / E_{delta/10} / 10 - 1|; set in the
  /// linear-response regime only
  std::optional<double> linearity_error;
  bool pass(double linear_tol) const {
    return report.pass && (!linearity_error || *linearity_error <= linear_tol);
  }
};

struct StabilityReport {
  std::string kernel_id;
  std::vector<double> times;
  double growth_rate = 0.0; ///< 2 M_{A^2}(f(0))
  double linear_tol = 0.05;
  std::vector<StabilityCase> cases;
  bool pass() const {
    return std::all_of(cases.begin(), cases.end(),
                       [&](const auto& c) { return c.pass(linear_tol); });
  }
};

inline StabilityReport stability_study(const StabilityConfig& cfg) {
  cfg.validate();
  const BoundSequence A = cfg.A ? *cfg.A : dominating_sequence(cfg.kernel, cfg.n);
  const auto f0 = cfg.ic.realize(cfg.n);
  const auto samples = cfg.samples.empty() ? uniform_samples(cfg.t_end, 8) : cfg.samples;
  // f on a tight adaptive schedule; every g replays it exactly
  const auto f = reference_integrate(f0, cfg.kernel, cfg.t_end, cfg.reference_tol, samples);
  const double mass0 = norm_1(f0);

  auto perturbed = [&](double delta) {
    auto g = f0.values();
    g[cfg.perturb_index - 1] += delta;
    return integrate_on_schedule(ClusterState<>(g), cfg.kernel, f.step_times, f.times);
  };

  StabilityReport rep;
  rep.kernel_id = cfg.kernel.id();
  rep.times = f.times;
  rep.linear_tol = cfg.linear_tol;
  rep.cases.resize(cfg.deltas.size());
  run_pool(cfg.deltas.size(), cfg.jobs, [&](std::size_t k) {
    StabilityCase& c = rep.cases[k];
    c.delta = cfg.deltas[k];
    const auto g = perturbed(c.delta);
    c.report = gronwall_stability_check(f, g, cfg.kernel, A, cfg.tol);
    for (const auto& e : c.report.entries) {
      c.distance.push_back(e.lhs);
      c.bound.push_back(e.bound);
    }
    if (c.delta > 0.0 && c.delta <= 1e-6 * mass0) {
      const auto g10 = perturbed(c.delta / 10.0);
      const auto r10 = gronwall_stability_check(f, g10, cfg.kernel, A, cfg.tol);
      double worst = 0.0;
      for (std::size_t s = 1; s < r10.entries.size(); ++s) {
        const double ratio = c.report.entries[s].lhs / r10.entries[s].lhs;
        worst = std::max(worst, std::abs(ratio / 10.0 - 1.0));
      }
      c.linearity_error = worst;
    }
  });
  rep.growth_rate = 2.0 * a_moment(f0, A, 2);
  return rep;
}

// ---------------------------------------------------------------------------
// random signed weights

/// count random signed weights (standard normal entries, deterministic in
/// seed) integrated together; returns the balance report over all of them.
inline DiagnosticReport weight_identity_study(const Kernel& kernel, const ClusterState<>& ic,
                                              double t_end, std::size_t count,
                                              std::uint64_t seed, double tol,
                                              double rel_tol = 1e-10) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<WeightSequence> weights;
  for (std::size_t w = 0; w < count; ++w) {
    std::vector<double> th(ic.size());
    for (auto& v : th) v = z(rng);
    weights.push_back(WeightSequence::from_values("random:" + std::to_string(w), std::move(th)));
  }
  IntegratorConfig cfg;
  cfg.t_end = t_end;
  cfg.rel_tol = rel_tol;
  const auto traj = integrate(ic, kernel, cfg, weights);
  return weight_balance_check(traj, weights, tol);
}

// ---------------------------------------------------------------------------
// right-hand side benchmark

struct BenchRow {
  Index n = 0;
  double max_rel_error = 0.0;
  double naive_median = 0.0; ///< seconds
  double fast_median = 0.0;
  double ratio() const { return fast_median > 0.0 ? naive_median / fast_median : kNaN; }
};

struct BenchReport {
  std::string kernel_id;
  std::size_t repetitions = 0;
  double agreement_tol = 1e-11;
  std::vector<BenchRow> rows;
  double naive_exponent = kNaN; ///< log-log slope of medians over the full n range
  double fast_exponent = kNaN;

  bool ratio_strictly_increasing() const {
    for (std::size_t k = 1; k < rows.size(); ++k)
      if (!(rows[k].ratio() > rows[k - 1].ratio())) return false;
    return true;
  }
};

/// Largest componentwise error of the fast df relative to gain_i + loss_i of
/// the exact sum, the natural conditioning scale of df_i. Components with no
/// gain and no loss fall back to ||g||_2^2.
inline double fast_path_error(const RhsOutput<double>& fast, const RhsOutput<double>& naive,
                              const Kernel& kernel, const ClusterState<>& f) {
  double g2 = 0.0;
  for (Index i = 1; i <= f.size(); ++i) g2 += std::pow(kernel.product_factor(i) * f.at(i), 2);
  double worst = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) {
    double scale = naive.gain[k] + naive.loss[k];
    if (scale == 0.0) scale = g2 > 0.0 ? g2 : 1.0;
    worst = std::max(worst, std::abs(fast.df[k] - naive.df[k]) / scale);
  }
  return worst;
}

namespace detail {

template <typename F>
double median_seconds(std::size_t reps, F&& body) {
  std::vector<double> t;
  for (std::size_t r = 0; r < reps; ++r) {
    const auto start = std::chrono::steady_clock::now();
    body();
    t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
  std::sort(t.begin(), t.end());
  return t.size() % 2 ? t[t.size() / 2] : 0.5 * (t[t.size() / 2 - 1] + t[t.size() / 2]);
}

inline double loglog_slope(const std::vector<BenchRow>& rows, double BenchRow::*field) {
  if (rows.size() < 2) return kNaN;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& r : rows) {
    const double x = std::log(double(r.n)), y = std::log(r.*field);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double m = double(rows.size());
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

} // namespace detail

/// Times rhs_naive against rhs_separable_fast. Agreement is verified on each
/// n before any timing; a mismatch aborts with contract_violation.
inline BenchReport rhs_benchmark(const Kernel& kernel, const std::vector<Index>& n_list,
                                 std::size_t repetitions, std::uint64_t seed = 1,
                                 double agreement_tol = 1e-11) {
  if (!kernel.is_product())
    throw precondition_error("benchmark needs a product kernel, got " + kernel.id());
  if (repetitions < 1) throw configuration_error("bench.repetitions must be >= 1");
  for (Index n : n_list)
    if (n < 1) throw configuration_error("bench.n_list entries must be >= 1");
  BenchReport rep;
  rep.kernel_id = kernel.id();
  rep.repetitions = repetitions;
  rep.agreement_tol = agreement_tol;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Index n : n_list) {
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    const ClusterState<> f(std::move(v));
    BenchRow row;
    row.n = n;
    const auto slow = rhs_naive(f, kernel);
    const auto fast = rhs_separable_fast(f, kernel);
    row.max_rel_error = fast_path_error(fast, slow, kernel, f);
    if (!(row.max_rel_error <= agreement_tol))
      throw contract_violation("fast path disagrees with the exact sum at n=" + std::to_string(n) +
                               ": relative error " + format_real(row.max_rel_error));
    volatile double sink = 0.0;
    row.naive_median = detail::median_seconds(repetitions, [&] { sink = rhs_naive(f, kernel).df[0]; });
    row.fast_median =
        detail::median_seconds(repetitions, [&] { sink = rhs_separable_fast(f, kernel).df[0]; });
    (void)sink;
    rep.rows.push_back(row);
  }
  rep.naive_exponent = detail::loglog_slope(rep.rows, &BenchRow::naive_median);
  rep.fast_exponent = detail::loglog_slope(rep.rows, &BenchRow::fast_median);
  return rep;
}

} // namespace rbk

#endif // RBK_EXPERIMENTS_HPP
