#ifndef RBK_DIAGNOSTICS_HPP
#define RBK_DIAGNOSTICS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "rbk/errors.hpp"
#include "rbk/integrator.hpp"
#include "rbk/kernel.hpp"
#include "rbk/sequence_space.hpp"

namespace rbk {

/// One evaluated inequality or identity. residual <= tol means it holds.
struct CheckEntry {
  double t = 0.0;
  Index m = 0; ///< tail index or weight slot; 0 when not applicable
  double lhs = 0.0;
  double bound = 0.0;
  double residual = 0.0;
};

struct DiagnosticReport {
  std::string name;
  double tol = 0.0;
  bool pass = true;
  std::vector<CheckEntry> entries;
  CheckEntry worst{0.0, 0, 0.0, 0.0, -std::numeric_limits<double>::infinity()};
  std::string note;

  DiagnosticReport() = default;
  DiagnosticReport(std::string check, double tolerance) : name(std::move(check)), tol(tolerance) {}

  void add(const CheckEntry& e) {
    entries.push_back(e);
    if (!(e.residual <= tol)) pass = false;
    if (e.residual > worst.residual || std::isnan(e.residual)) worst = e;
  }

  /// Smallest gap tol - residual over all entries (negative when failing).
  double slack() const { return tol - worst.residual; }
};

namespace detail {

/// (lhs - bound) / scale where scale is the bound itself when positive.
/// Relative excess above the bound; fallback scale used when bound == 0.
inline double relative_excess(double lhs, double bound, double fallback) {
  const double scale = bound > 0.0 ? bound : (fallback > 0.0 ? fallback : 1.0);
  return (lhs - bound) / scale;
}

inline double positive_or_one(double x) { return x > 0.0 ? x : 1.0; }

template <typename Real>
double dbl(const Real& x) {
  return static_cast<double>(x);
}

template <typename Real>
void require_accumulators(const Trajectory<Real>& traj, std::size_t count, const char* what) {
  for (const auto& acc : traj.accumulators)
    if (acc.size() < count)
      throw configuration_error(std::string("trajectory lacks the ") + what + " accumulator");
  if (traj.samples() == 0) throw configuration_error("trajectory has no samples");
}

} // namespace detail

/// |‖f(t)‖_1 + D(t) - ‖f(0)‖_1| / ‖f(0)‖_1 at every sample, D the integrated
/// min-dissipation density.
template <typename Real>
DiagnosticReport mass_balance_check(const Trajectory<Real>& traj, double tol) {
  detail::require_accumulators(traj, 1, "min-dissipation");
  DiagnosticReport rep{"mass_balance", tol};
  const Real m0 = norm_1(traj.initial());
  const double scale = detail::positive_or_one(detail::dbl(m0));
  for (std::size_t s = 0; s < traj.samples(); ++s) {
    using std::abs;
    const Real lhs = norm_1(traj.states[s]) + traj.min_dissipation_integral(s);
    const double r = detail::dbl(abs(lhs - m0)) / scale;
    rep.add({traj.times[s], 0, detail::dbl(lhs), detail::dbl(m0), r});
  }
  return rep;
}

/// sum_{j>=m} j f_j(t) <= sum_{j>=m} j f_j(0) + tol ‖f(0)‖_1.
template <typename Real>
DiagnosticReport tail_monotonicity_check(const Trajectory<Real>& traj,
                                         const std::vector<Index>& m_set, double tol) {
  DiagnosticReport rep{"tail_monotonicity", tol};
  const double scale = detail::positive_or_one(detail::dbl(norm_1(traj.initial())));
  for (Index m : m_set) {
    const double tail0 = detail::dbl(tail_first_moment(traj.initial(), m));
    for (std::size_t s = 0; s < traj.samples(); ++s) {
      const double tail = detail::dbl(tail_first_moment(traj.states[s], m));
      rep.add({traj.times[s], m, tail, tail0, (tail - tail0) / scale});
    }
  }
  return rep;
}

/// Accumulated tail dissipation for weight tail:m is at most twice the
/// initial tail moment. The trajectory must carry WeightSequence::tail(m).
template <typename Real>
DiagnosticReport tail_dissipation_check(const Trajectory<Real>& traj,
                                        const std::vector<Index>& m_set, double tol) {
  DiagnosticReport rep{"tail_dissipation", tol};
  const double mass0 = detail::dbl(norm_1(traj.initial()));
  for (Index m : m_set) {
    const auto w = traj.weight_index(WeightSequence::tail_name(m));
    if (!w)
      throw configuration_error("tail dissipation accumulator for m=" + std::to_string(m) +
                                " was not registered");
    const double bound = 2.0 * detail::dbl(tail_first_moment(traj.initial(), m));
    for (std::size_t s = 0; s < traj.samples(); ++s) {
      const double lhs = detail::dbl(traj.weight_lower(s, *w) + traj.weight_diag(s, *w));
      rep.add({traj.times[s], m, lhs, bound, detail::relative_excess(lhs, bound, mass0)});
    }
  }
  return rep;
}

/// sum_{i>=m} A_i f_i(t) <= sum_{i>=m} A_i f_i(0). Needs a_{i,j} <= A_i A_j on
/// the truncation range, else precondition_error.
template <typename Real>
DiagnosticReport weighted_tail_check(const Trajectory<Real>& traj, const Kernel& kernel,
                                     const BoundSequence& A, const std::vector<Index>& m_set,
                                     double tol) {
  const BoundCheck bc = verify_bound(kernel, A, traj.n);
  if (!bc.holds)
    throw precondition_error("bound sequence does not dominate " + kernel.id() + " at (" +
                             std::to_string(bc.worst_i) + "," + std::to_string(bc.worst_j) +
                             "), ratio " + format_real(bc.worst_ratio));
  DiagnosticReport rep{"weighted_tail", tol};
  const double total0 = detail::dbl(a_moment(traj.initial(), A, 1));
  for (Index m : m_set) {
    const double bound = detail::dbl(a_tail_moment(traj.initial(), A, m));
    for (std::size_t s = 0; s < traj.samples(); ++s) {
      const double lhs = detail::dbl(a_tail_moment(traj.states[s], A, m));
      rep.add({traj.times[s], m, lhs, bound, detail::relative_excess(lhs, bound, total0)});
    }
  }
  return rep;
}

/// Integrated sum_i |df_i/dt| <= 4 ‖f(0)‖_1.
template <typename Real>
DiagnosticReport derivative_l1_check(const Trajectory<Real>& traj, double tol) {
  detail::require_accumulators(traj, 2, "|df| integral");
  DiagnosticReport rep{"derivative_l1", tol};
  const double mass0 = detail::dbl(norm_1(traj.initial()));
  const double bound = 4.0 * mass0;
  for (std::size_t s = 0; s < traj.samples(); ++s) {
    const double lhs = detail::dbl(traj.abs_derivative_integral(s));
    rep.add({traj.times[s], 0, lhs, bound, detail::relative_excess(lhs, bound, 1.0)});
  }
  return rep;
}

/// ‖f(t) - g(t)‖_A <= ‖f(0) - g(0)‖_A exp(2 M_{A^2}(f(0)) t).
template <typename Real>
DiagnosticReport gronwall_stability_check(const Trajectory<Real>& f, const Trajectory<Real>& g,
                                          const Kernel& kernel, const BoundSequence& A,
                                          double tol) {
  if (f.n != g.n) throw configuration_error("trajectories have different truncation sizes");
  if (f.kernel_id != g.kernel_id) throw configuration_error("trajectories use different kernels");
  if (f.times != g.times) throw configuration_error("trajectories have different sample grids");
  const BoundCheck bc = verify_bound(kernel, A, f.n);
  if (!bc.holds)
    throw precondition_error("bound sequence does not dominate " + kernel.id());
  DiagnosticReport rep{"gronwall_stability", tol};
  const double growth = 2.0 * detail::dbl(a_moment(f.initial(), A, 2));
  const double fallback = detail::dbl(a_moment(f.initial(), A, 1));
  auto distance = [&](std::size_t s) {
    CompensatedSum<Real> d;
    for (std::size_t k = 0; k < f.n; ++k) {
      using std::abs;
      d += Real(A[k + 1]) * abs(f.states[s][k] - g.states[s][k]);
    }
    return detail::dbl(d.value());
  };
  const double e0 = distance(0);
  for (std::size_t s = 0; s < f.samples(); ++s) {
    const double e = distance(s);
    const double bound = e0 * std::exp(growth * f.times[s]);
    rep.add({f.times[s], 0, e, bound, detail::relative_excess(e, bound, fallback)});
  }
  rep.note = "growth rate 2 M_{A^2}(f(0)) = " + format_real(growth);
  return rep;
}

/// For every registered weight: sum theta f(t) + integral of both dissipation
/// sums equals sum theta f(0). Residual relative to sum |theta_i| f_i(0).
template <typename Real>
DiagnosticReport weight_balance_check(const Trajectory<Real>& traj,
                                      const std::vector<WeightSequence>& weights, double tol) {
  DiagnosticReport rep{"weight_balance", tol};
  for (const auto& w : weights) {
    const auto slot = traj.weight_index(w.name());
    if (!slot) throw configuration_error("weight '" + w.name() + "' was not registered");
    const Real m0 = weighted_moment(traj.initial(), w);
    CompensatedSum<Real> abs0;
    for (std::size_t k = 0; k < traj.n; ++k) {
      using std::abs;
      abs0 += Real(std::abs(w(k + 1))) * traj.initial()[k];
    }
    const double scale = detail::positive_or_one(detail::dbl(abs0.value()));
    for (std::size_t s = 0; s < traj.samples(); ++s) {
      using std::abs;
      const Real lhs = weighted_moment(traj.states[s], w) + traj.weight_lower(s, *slot) +
                       traj.weight_diag(s, *slot);
      rep.add({traj.times[s], *slot, detail::dbl(lhs), detail::dbl(m0),
               detail::dbl(abs(lhs - m0)) / scale});
    }
  }
  return rep;
}

/// For nonnegative non-decreasing weights: sum theta f(t) is non-increasing
/// between consecutive samples and both accumulators are non-decreasing.
template <typename Real>
DiagnosticReport weight_monotonicity_check(const Trajectory<Real>& traj,
                                           const std::vector<WeightSequence>& weights,
                                           double tol) {
  DiagnosticReport rep{"weight_monotonicity", tol};
  for (const auto& w : weights) {
    if (!(w.nonnegative() && w.nondecreasing() && w.flags_hold(traj.n))) continue;
    const auto slot = traj.weight_index(w.name());
    if (!slot) throw configuration_error("weight '" + w.name() + "' was not registered");
    const double scale = detail::positive_or_one(detail::dbl(weighted_moment(traj.initial(), w)));
    for (std::size_t s = 1; s < traj.samples(); ++s) {
      const double prev = detail::dbl(weighted_moment(traj.states[s - 1], w));
      const double cur = detail::dbl(weighted_moment(traj.states[s], w));
      const double dl = detail::dbl(traj.weight_lower(s - 1, *slot) - traj.weight_lower(s, *slot));
      const double dd = detail::dbl(traj.weight_diag(s - 1, *slot) - traj.weight_diag(s, *slot));
      const double worst = std::max({cur - prev, dl, dd});
      rep.add({traj.times[s], *slot, cur, prev, worst / scale});
    }
  }
  return rep;
}

/// Log-spaced tail indices 1, 2, 5, 10, 25, 50, 100, 250, ... up to n.
inline std::vector<Index> log_spaced_indices(Index n) {
  std::vector<Index> out;
  for (Index decade = 1; decade <= n; decade *= 10) {
    const Index mid = decade == 1 ? 2 : decade * 5 / 2;
    for (Index m : {decade, mid, decade * 5})
      if (m <= n) out.push_back(m);
    if (decade > n / 10) break;
  }
  return out;
}

/// Weights registered by a run that wants the tail checks for m_set.
inline std::vector<WeightSequence> tail_weights(const std::vector<Index>& m_set) {
  std::vector<WeightSequence> w;
  for (Index m : m_set) w.push_back(WeightSequence::tail(m));
  return w;
}

} // namespace rbk

#endif // RBK_DIAGNOSTICS_HPP
