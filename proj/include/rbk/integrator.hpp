#ifndef RBK_INTEGRATOR_HPP
#define RBK_INTEGRATOR_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rbk/kernel.hpp"
#include "rbk/sequence_space.hpp"
#include "rbk/truncation.hpp"

namespace rbk {

enum class NegativityPolicy { RejectStep, ClipWithBudget };

inline const char* to_string(NegativityPolicy p) {
  return p == NegativityPolicy::RejectStep ? "reject_step" : "clip_with_budget";
}

// Far below any entry the diagnostics look at, so error control is relative
// on every component, including tail entries many decades below the peak.
inline constexpr double kDefaultAbsTol = 1e-30;

struct IntegratorConfig {
  double rel_tol = 1e-8;
  double abs_tol = kDefaultAbsTol;
  double t_end = 1.0;
  std::size_t max_steps = 2'000'000;
  double initial_step = 0.0; ///< 0 selects the step automatically
  NegativityPolicy negativity = NegativityPolicy::RejectStep;
  double clip_budget = 0.0; ///< epsilon for ClipWithBudget

  void validate() const {
    if (!(rel_tol > 0.0)) throw std::invalid_argument("integrator.rel_tol must be > 0");
    if (!(abs_tol > 0.0)) throw std::invalid_argument("integrator.abs_tol must be > 0");
    if (!(t_end > 0.0) || !std::isfinite(t_end))
      throw std::invalid_argument("integrator.t_end must be finite and > 0");
    if (max_steps == 0) throw std::invalid_argument("integrator.max_steps must be >= 1");
    if (!(initial_step >= 0.0)) throw std::invalid_argument("integrator.initial_step must be >= 0");
    if (negativity == NegativityPolicy::ClipWithBudget && !(clip_budget > 0.0))
      throw std::invalid_argument("integrator.clip_budget must be > 0 for clip_with_budget");
  }

  /// Entries below -threshold reject the step; entries in [-threshold, 0) are clamped.
  double negativity_threshold() const {
    return negativity == NegativityPolicy::RejectStep ? abs_tol : clip_budget;
  }
};

struct StepStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t negativity_rejections = 0;
  std::size_t rhs_evaluations = 0;
  std::size_t clamp_events = 0;
  double clamped_mass = 0.0; ///< sum of i |f_i| over clamped entries
  double min_step = std::numeric_limits<double>::infinity();
  double max_step = 0.0;
  double richardson_error = std::numeric_limits<double>::quiet_NaN();
};

/// Time-sampled solution of the truncated system plus co-integrated
/// dissipation functionals (see FlowEvaluator for the accumulator layout).
template <typename Real = double>
struct Trajectory {
  Index n = 0;
  std::string kernel_id;
  std::vector<double> times;
  std::vector<ClusterState<Real>> states;
  std::vector<std::vector<Real>> accumulators;
  std::vector<std::string> weight_names;
  std::vector<double> step_times; ///< accepted step end points, replayable
  StepStats stats;

  std::size_t samples() const { return times.size(); }
  const ClusterState<Real>& initial() const { return states.front(); }

  const Real& min_dissipation_integral(std::size_t s) const {
    return accumulators[s][FlowEvaluator<Real>::kMinDissipation];
  }
  const Real& abs_derivative_integral(std::size_t s) const {
    return accumulators[s][FlowEvaluator<Real>::kAbsDerivative];
  }
  const Real& weight_lower(std::size_t s, std::size_t w) const {
    return accumulators[s][FlowEvaluator<Real>::kFirstWeight + 2 * w];
  }
  const Real& weight_diag(std::size_t s, std::size_t w) const {
    return accumulators[s][FlowEvaluator<Real>::kFirstWeight + 2 * w + 1];
  }
  std::optional<std::size_t> weight_index(const std::string& name) const {
    for (std::size_t w = 0; w < weight_names.size(); ++w)
      if (weight_names[w] == name) return w;
    return std::nullopt;
  }
};

/// Base of all integration failures; carries the time reached.
class integration_error : public std::runtime_error {
public:
  enum class Kind { StepLimit, Stiffness, Divergence, Negativity, Schedule };

  integration_error(Kind kind, double time, const std::string& what)
      : std::runtime_error(what), kind_(kind), time_(time) {}

  Kind kind() const { return kind_; }
  double time_reached() const { return time_; }

private:
  Kind kind_;
  double time_;
};

inline const char* to_string(integration_error::Kind k) {
  switch (k) {
  case integration_error::Kind::StepLimit: return "step_limit";
  case integration_error::Kind::Stiffness: return "stiffness";
  case integration_error::Kind::Divergence: return "divergence";
  case integration_error::Kind::Negativity: return "negativity";
  case integration_error::Kind::Schedule: return "schedule";
  }
  return "?";
}

/// Failure with the trajectory recorded up to the failure point.
template <typename Real>
class integration_failure : public integration_error {
public:
  integration_failure(Kind kind, double time, const std::string& what, Trajectory<Real> partial)
      : integration_error(kind, time, what), partial_(std::move(partial)) {}
  const Trajectory<Real>& partial() const { return partial_; }

private:
  Trajectory<Real> partial_;
};

namespace detail {

// Dormand-Prince 5(4) tableau.
struct DormandPrince {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
  static constexpr int order = 5;
};

template <typename Real>
double to_double(const Real& x) {
  return static_cast<double>(x);
}

template <typename Real>
bool all_finite(const std::vector<Real>& v) {
  using std::isfinite;
  for (const Real& x : v)
    if (!isfinite(x)) return false;
  return true;
}

/// Merges requested sample times with 0 and t_end; validates the range.
inline std::vector<double> normalize_samples(std::vector<double> samples, double t_end) {
  for (double t : samples)
    if (!(t >= 0.0 && t <= t_end))
      throw std::invalid_argument("sample time " + format_real(t) + " outside [0, t_end]");
  samples.push_back(0.0);
  samples.push_back(t_end);
  std::sort(samples.begin(), samples.end());
  samples.erase(std::unique(samples.begin(), samples.end()), samples.end());
  return samples;
}

template <typename Real>
class Stepper {
public:
  Stepper(const Kernel& kernel, Index n, const std::vector<WeightSequence>& weights)
      : eval_(kernel, n, weights), n_(n), dim_(n + eval_.accumulator_count()) {
    for (auto& k : k_) k.assign(dim_, Real(0));
    tmp_.assign(dim_, Real(0));
    ynew_.assign(dim_, Real(0));
    err_.assign(dim_, Real(0));
  }

  std::size_t dim() const { return dim_; }
  Index n() const { return n_; }
  std::size_t evaluations() const { return evals_; }

  void derivative(const std::vector<Real>& y, std::vector<Real>& dy) {
    ++evals_;
    std::span<const Real> f(y.data(), n_);
    eval_(f, std::span<Real>(dy.data(), n_),
          std::span<Real>(dy.data() + n_, dim_ - n_));
  }

  /// First stage derivative at the current point (FSAL slot).
  std::vector<Real>& k1() { return k_[0]; }

  /// Trial step from y with step h; the candidate lands in ynew(), the error
  /// estimate in err(). Requires k1() to hold f(y).
  void trial(const std::vector<Real>& y, double hd) {
    using DP = DormandPrince;
    const Real h(hd);
    auto combo = [&](std::vector<Real>& out, std::initializer_list<std::pair<double, int>> terms) {
      for (std::size_t i = 0; i < dim_; ++i) {
        Real acc(0);
        for (auto [c, s] : terms) acc += Real(c) * k_[s][i];
        out[i] = y[i] + h * acc;
      }
    };
    combo(tmp_, {{DP::a21, 0}});
    derivative(tmp_, k_[1]);
    combo(tmp_, {{DP::a31, 0}, {DP::a32, 1}});
    derivative(tmp_, k_[2]);
    combo(tmp_, {{DP::a41, 0}, {DP::a42, 1}, {DP::a43, 2}});
    derivative(tmp_, k_[3]);
    combo(tmp_, {{DP::a51, 0}, {DP::a52, 1}, {DP::a53, 2}, {DP::a54, 3}});
    derivative(tmp_, k_[4]);
    combo(tmp_, {{DP::a61, 0}, {DP::a62, 1}, {DP::a63, 2}, {DP::a64, 3}, {DP::a65, 4}});
    derivative(tmp_, k_[5]);
    combo(ynew_, {{DP::b1, 0}, {DP::b3, 2}, {DP::b4, 3}, {DP::b5, 4}, {DP::b6, 5}});
    derivative(ynew_, k_[6]);
    for (std::size_t i = 0; i < dim_; ++i) {
      err_[i] = h * (Real(DP::e1) * k_[0][i] + Real(DP::e3) * k_[2][i] + Real(DP::e4) * k_[3][i] +
                     Real(DP::e5) * k_[4][i] + Real(DP::e6) * k_[5][i] + Real(DP::e7) * k_[6][i]);
    }
  }

  std::vector<Real>& ynew() { return ynew_; }
  const std::vector<Real>& err() const { return err_; }
  const std::vector<Real>& k_last() const { return k_[6]; }
  bool stages_finite() const {
    for (const auto& k : k_)
      if (!all_finite(k)) return false;
    return all_finite(ynew_);
  }

  /// Accept the candidate: FSAL copies the last stage into k1.
  void accept_fsal() { std::swap(k_[0], k_[6]); }

private:
  FlowEvaluator<Real> eval_;
  Index n_;
  std::size_t dim_;
  std::array<std::vector<Real>, 7> k_;
  std::vector<Real> tmp_, ynew_, err_;
  std::size_t evals_ = 0;
};

/// Clamps entries of the state part in [-threshold, 0) to zero. Returns false
/// when some entry lies below -threshold.
template <typename Real>
bool enforce_nonnegativity(std::vector<Real>& y, Index n, double threshold, StepStats& stats,
                           bool& clamped) {
  clamped = false;
  for (Index k = 0; k < n; ++k)
    if (y[k] < Real(-threshold)) return false;
  for (Index k = 0; k < n; ++k) {
    if (y[k] < Real(0)) {
      stats.clamped_mass += double(k + 1) * -to_double(y[k]);
      ++stats.clamp_events;
      y[k] = Real(0);
      clamped = true;
    }
  }
  return true;
}

template <typename Real>
void record_sample(Trajectory<Real>& traj, double t, const std::vector<Real>& y, Index n) {
  traj.times.push_back(t);
  traj.states.emplace_back(std::vector<Real>(y.begin(), y.begin() + n));
  traj.accumulators.emplace_back(y.begin() + n, y.end());
}

template <typename Real>
Trajectory<Real> start_trajectory(const ClusterState<Real>& ic, const Kernel& kernel,
                                  const std::vector<WeightSequence>& weights) {
  Trajectory<Real> traj;
  traj.n = ic.size();
  traj.kernel_id = kernel.id();
  for (const auto& w : weights) traj.weight_names.push_back(w.name());
  return traj;
}

} // namespace detail

/// Integrates the truncated system with Dormand-Prince 5(4) error control on
/// the augmented state (f together with all dissipation accumulators). Steps
/// are aligned to land exactly on every sample time.
template <typename Real = double>
Trajectory<Real> integrate(const ClusterState<Real>& ic, const Kernel& kernel,
                           const IntegratorConfig& cfg,
                           const std::vector<WeightSequence>& weights = {},
                           std::vector<double> sample_times = {}) {
  using std::abs;
  cfg.validate();
  const Index n = ic.size();
  if (n < 1) throw std::invalid_argument("initial condition is empty");
  const std::vector<double> samples = detail::normalize_samples(std::move(sample_times), cfg.t_end);

  detail::Stepper<Real> stepper(kernel, n, weights);
  Trajectory<Real> traj = detail::start_trajectory(ic, kernel, weights);
  const std::size_t dim = stepper.dim();

  std::vector<Real> y(dim, Real(0));
  std::copy(ic.begin(), ic.end(), y.begin());
  double t = 0.0;
  detail::record_sample(traj, t, y, n);
  traj.step_times.push_back(0.0);

  auto fail = [&](integration_error::Kind kind, const std::string& msg) {
    traj.stats.rhs_evaluations = stepper.evaluations();
    throw integration_failure<Real>(kind, t, msg + " at t=" + format_real(t), traj);
  };

  stepper.derivative(y, stepper.k1());
  if (!detail::all_finite(stepper.k1()))
    fail(integration_error::Kind::Divergence, "non-finite right-hand side");

  double h = cfg.initial_step;
  if (h == 0.0) {
    double fmax = 0.0, dmax = 0.0;
    for (Index k = 0; k < n; ++k) {
      fmax = std::max(fmax, std::abs(detail::to_double(y[k])));
      dmax = std::max(dmax, std::abs(detail::to_double(stepper.k1()[k])));
    }
    const double order = detail::DormandPrince::order;
    h = fmax > 0.0 ? std::pow(cfg.rel_tol, 1.0 / order) / (1.0 + dmax / fmax) : cfg.t_end;
  }
  h = std::min(h, cfg.t_end);

  const double threshold = cfg.negativity_threshold();
  const double tiny_step = cfg.t_end * 1e-9;
  std::size_t tiny_run = 0;
  std::size_t nonfinite_run = 0;
  double err_prev = 1e-4;
  std::size_t next = 1;
  std::size_t attempts = 0;

  while (next < samples.size()) {
    if (attempts >= cfg.max_steps)
      fail(integration_error::Kind::StepLimit,
           "step limit of " + std::to_string(cfg.max_steps) + " reached");
    ++attempts;

    const double target = samples[next];
    bool aligned = false;
    double step = h;
    if (t + step >= target) {
      step = target - t;
      aligned = true;
    }
    if (!(step > 0.0) || t + step == t)
      fail(integration_error::Kind::Stiffness, "step size underflow");

    stepper.trial(y, step);

    if (!stepper.stages_finite()) {
      ++traj.stats.rejected;
      if (++nonfinite_run > 60) fail(integration_error::Kind::Divergence, "non-finite right-hand side");
      h = step * 0.25;
      continue;
    }
    nonfinite_run = 0;

    double err = 0.0;
    const auto& ynew = stepper.ynew();
    const auto& e = stepper.err();
    for (std::size_t i = 0; i < dim; ++i) {
      const double scale =
          cfg.abs_tol + cfg.rel_tol * std::max(std::abs(detail::to_double(y[i])),
                                               std::abs(detail::to_double(ynew[i])));
      err = std::max(err, std::abs(detail::to_double(e[i])) / scale);
    }

    if (err > 1.0) {
      ++traj.stats.rejected;
      h = step * std::max(0.2, 0.9 * std::pow(err, -0.2));
      continue;
    }

    bool clamped = false;
    if (!detail::enforce_nonnegativity(stepper.ynew(), n, threshold, traj.stats, clamped)) {
      ++traj.stats.rejected;
      ++traj.stats.negativity_rejections;
      h = step * 0.5;
      continue;
    }

    // accepted
    t = aligned ? target : t + step;
    std::swap(y, stepper.ynew());
    if (clamped) {
      stepper.derivative(y, stepper.k1());
    } else {
      stepper.accept_fsal();
    }
    ++traj.stats.accepted;
    traj.stats.min_step = std::min(traj.stats.min_step, step);
    traj.stats.max_step = std::max(traj.stats.max_step, step);
    traj.step_times.push_back(t);
    if (!detail::all_finite(stepper.k1()))
      fail(integration_error::Kind::Divergence, "non-finite right-hand side");

    if (!aligned) {
      tiny_run = step < tiny_step ? tiny_run + 1 : 0;
      if (tiny_run >= 100)
        fail(integration_error::Kind::Stiffness,
             "accepted step below t_end*1e-9 for 100 consecutive steps; the explicit scheme "
             "hit its stability ceiling, reduce n or scale the initial data");
    }

    // PI step-size controller (Hairer's DOPRI5 constants)
    const double e_now = std::max(err, 1e-10);
    double fac = 0.9 * std::pow(e_now, -0.17) * std::pow(err_prev, 0.04);
    fac = std::clamp(fac, 0.2, 5.0);
    err_prev = std::max(err, 1e-4);
    const double proposed = step * fac;
    // an alignment-shortened step should not shrink the controller's step
    h = aligned ? std::max(h, proposed) : proposed;

    if (aligned) {
      detail::record_sample(traj, t, y, n);
      ++next;
    }
  }
  traj.stats.rhs_evaluations = stepper.evaluations();
  return traj;
}

/// Re-runs the exact step sequence of a previous integration (step_times),
/// without error control. Two runs replaying the same schedule apply the
/// same discrete map, so their difference isolates the effect of the data.
/// Every sample time must be one of the step times.
template <typename Real = double>
Trajectory<Real> integrate_on_schedule(const ClusterState<Real>& ic, const Kernel& kernel,
                                       const std::vector<double>& step_times,
                                       const std::vector<double>& sample_times,
                                       const std::vector<WeightSequence>& weights = {},
                                       double negativity_threshold = 0.0) {
  const Index n = ic.size();
  if (n < 1) throw std::invalid_argument("initial condition is empty");
  if (step_times.size() < 2 || step_times.front() != 0.0)
    throw std::invalid_argument("step schedule must start at 0 and contain a step");
  for (std::size_t k = 1; k < step_times.size(); ++k)
    if (!(step_times[k] > step_times[k - 1]))
      throw std::invalid_argument("step schedule must be strictly increasing");
  const std::vector<double> samples =
      detail::normalize_samples(sample_times, step_times.back());
  for (double s : samples)
    if (!std::binary_search(step_times.begin(), step_times.end(), s))
      throw std::invalid_argument("sample time " + format_real(s) + " is not a step point");

  detail::Stepper<Real> stepper(kernel, n, weights);
  Trajectory<Real> traj = detail::start_trajectory(ic, kernel, weights);
  traj.step_times = step_times;
  std::vector<Real> y(stepper.dim(), Real(0));
  std::copy(ic.begin(), ic.end(), y.begin());
  detail::record_sample(traj, 0.0, y, n);
  stepper.derivative(y, stepper.k1());
  std::size_t next = 1;
  for (std::size_t k = 1; k < step_times.size(); ++k) {
    const double t0 = step_times[k - 1];
    const double t1 = step_times[k];
    stepper.trial(y, t1 - t0);
    if (!stepper.stages_finite())
      throw integration_failure<Real>(integration_error::Kind::Divergence, t0,
                                      "non-finite state while replaying schedule", traj);
    bool clamped = false;
    if (!detail::enforce_nonnegativity(stepper.ynew(), n, negativity_threshold, traj.stats,
                                       clamped))
      throw integration_failure<Real>(integration_error::Kind::Negativity, t0,
                                      "replayed step left the nonnegative cone at t=" +
                                          format_real(t0),
                                      traj);
    std::swap(y, stepper.ynew());
    if (clamped)
      stepper.derivative(y, stepper.k1());
    else
      stepper.accept_fsal();
    ++traj.stats.accepted;
    traj.stats.min_step = std::min(traj.stats.min_step, t1 - t0);
    traj.stats.max_step = std::max(traj.stats.max_step, t1 - t0);
    if (next < samples.size() && t1 == samples[next]) {
      detail::record_sample(traj, t1, y, n);
      ++next;
    }
  }
  traj.stats.rhs_evaluations = stepper.evaluations();
  return traj;
}

/// Tight-tolerance oracle run. Integrates adaptively at tol, then replays the
/// accepted schedule with every step halved; the halved run is returned and
/// the Richardson estimate max|y_h - y_{h/2}| / (2^5 - 1), relative to the
/// largest state entry, is stored in stats.richardson_error.
template <typename Real = double>
Trajectory<Real> reference_integrate(const ClusterState<Real>& ic, const Kernel& kernel,
                                     double t_end, double tol = 1e-12,
                                     std::vector<double> sample_times = {},
                                     const std::vector<WeightSequence>& weights = {}) {
  IntegratorConfig cfg;
  cfg.rel_tol = tol;
  double scale = 0.0;
  for (const Real& v : ic) scale = std::max(scale, detail::to_double(v));
  cfg.abs_tol = scale > 0.0 ? kDefaultAbsTol * scale : kDefaultAbsTol;
  cfg.t_end = t_end;
  cfg.max_steps = 20'000'000;
  Trajectory<Real> coarse = integrate(ic, kernel, cfg, weights, sample_times);

  std::vector<double> fine;
  fine.reserve(2 * coarse.step_times.size());
  fine.push_back(0.0);
  for (std::size_t k = 1; k < coarse.step_times.size(); ++k) {
    const double a = coarse.step_times[k - 1];
    const double b = coarse.step_times[k];
    const double mid = a + 0.5 * (b - a);
    if (mid > a && mid < b) fine.push_back(mid);
    fine.push_back(b);
  }
  Trajectory<Real> out =
      integrate_on_schedule(ic, kernel, fine, coarse.times, weights, cfg.negativity_threshold());

  double diff = 0.0, mag = 0.0;
  for (std::size_t s = 0; s < out.samples(); ++s) {
    for (std::size_t k = 0; k < out.n; ++k) {
      using std::abs;
      diff = std::max(diff, detail::to_double(abs(out.states[s][k] - coarse.states[s][k])));
      mag = std::max(mag, detail::to_double(abs(out.states[s][k])));
    }
  }
  out.stats.richardson_error = mag > 0.0 ? diff / 31.0 / mag : diff / 31.0;
  return out;
}

} // namespace rbk

#endif // RBK_INTEGRATOR_HPP
