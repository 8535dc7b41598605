#ifndef RBK_TRUNCATION_HPP
#define RBK_TRUNCATION_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <thread>
#include <vector>

#include "rbk/autocorrelation.hpp"
#include "rbk/errors.hpp"
#include "rbk/kernel.hpp"
#include "rbk/sequence_space.hpp"
#include "rbk/summation.hpp"

namespace rbk {

/// Right-hand side of the truncated system, split as df = gain - loss.
template <typename Real = double>
struct RhsOutput {
  std::vector<Real> df;
  std::vector<Real> gain;
  std::vector<Real> loss;

  explicit RhsOutput(std::size_t n = 0) : df(n, Real(0)), gain(n, Real(0)), loss(n, Real(0)) {}
};

/// Dense materialization of a kernel on [1,n]^2 (upper triangle). Used by the
/// integrator so each right-hand side evaluation does no kernel dispatch.
class RateMatrix {
public:
  RateMatrix() = default;
  RateMatrix(const Kernel& kernel, Index n) : table_(n) {
    if (auto m = kernel.max_index(); m && n > *m)
      throw std::out_of_range("kernel " + kernel.id() + " is only defined up to index " +
                              std::to_string(*m));
    kernel.visit([&](const auto& k) {
      for (Index i = 1; i <= n; ++i)
        for (Index j = i; j <= n; ++j) table_.set(i, j, k(i, j));
    });
  }
  Index size() const { return table_.size(); }
  double operator()(Index i, Index j) const { return table_(i, j); }

private:
  SymmetricTable table_;
};

namespace detail {

inline constexpr std::size_t kParallelRowThreshold = 512;

/// Runs body(first, last) over [0, n) split in contiguous chunks. Each index
/// is handled by exactly one chunk, so per-row results do not depend on the
/// thread count.
template <typename Body>
void for_rows(std::size_t n, Body&& body) {
  const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  if (n < kParallelRowThreshold || hw == 1) {
    body(std::size_t{0}, n);
    return;
  }
  const std::size_t chunks = std::min<std::size_t>(hw, n / 64 + 1);
  std::vector<std::thread> workers;
  workers.reserve(chunks - 1);
  const std::size_t step = (n + chunks - 1) / chunks;
  for (std::size_t c = 1; c < chunks; ++c) {
    const std::size_t lo = c * step;
    const std::size_t hi = std::min(n, lo + step);
    if (lo < hi) workers.emplace_back([&body, lo, hi] { body(lo, hi); });
  }
  body(std::size_t{0}, std::min(n, step));
  for (auto& w : workers) w.join();
}

/// Naive O(n^2) evaluation. Rates is any callable (i, j) -> double.
/// When min_rate is non-null it receives sum_{j,k} min(j,k) a f_j f_k.
template <typename Real, typename Rates>
void naive_rhs_into(const Rates& a, std::span<const Real> f, RhsOutput<Real>& out,
                    Real* min_rate = nullptr) {
  const std::size_t n = f.size();
  out.df.assign(n, Real(0));
  out.gain.assign(n, Real(0));
  out.loss.assign(n, Real(0));
  std::vector<Real> min_rows(min_rate ? n : 0, Real(0));
  for_rows(n, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t r = lo; r < hi; ++r) {
      const Index i = r + 1;
      Real gain(0);
      for (Index j = 1; j + i <= n; ++j) gain += Real(a(i + j, j)) * f[i + j - 1] * f[j - 1];
      Real row(0);
      Real min_row(0);
      for (Index j = 1; j <= n; ++j) {
        const Real t = Real(a(i, j)) * f[j - 1];
        row += t;
        if (min_rate) min_row += Real(double(std::min(i, j))) * t;
      }
      out.gain[r] = gain;
      out.loss[r] = f[r] * row;
      out.df[r] = gain - out.loss[r];
      if (min_rate) min_rows[r] = f[r] * min_row;
    }
  });
  if (min_rate) {
    CompensatedSum<Real> s;
    for (const Real& v : min_rows) s += v;
    *min_rate = s.value();
  }
}

} // namespace detail

/// Exact double-loop right-hand side of the truncated system:
/// df_i = sum_{j<=n-i} a_{i+j,j} f_{i+j} f_j - f_i sum_{j<=n} a_{i,j} f_j.
template <typename State>
auto rhs_naive(const State& f, const Kernel& kernel) {
  using Real = typename State::value_type;
  if (auto m = kernel.max_index(); m && f.size() > *m)
    throw std::out_of_range("kernel " + kernel.id() + " is only defined up to index " +
                            std::to_string(*m));
  std::vector<Real> v(f.begin(), f.end());
  RhsOutput<Real> out(f.size());
  kernel.visit([&](const auto& k) { detail::naive_rhs_into<Real>(k, std::span<const Real>(v), out); });
  return out;
}

/// Product-kernel right-hand side a_{i,j} = r_i r_j in O(n log n): with
/// g_k = r_k f_k and S = sum g, loss_i = g_i S and gain_i is the lag-i
/// autocorrelation of g.
inline RhsOutput<double> rhs_separable_fast(std::span<const double> f, const SequenceFn& r) {
  const std::size_t n = f.size();
  RhsOutput<double> out(n);
  if (n == 0) return out;
  std::vector<double> g(n);
  CompensatedSum<double> total;
  for (std::size_t k = 0; k < n; ++k) {
    g[k] = r(k + 1) * f[k];
    total += g[k];
  }
  const double S = total.value();
  const std::vector<double> corr = autocorrelation(g);
  for (std::size_t k = 0; k < n; ++k) {
    // FFT roundoff can leave tiny negative values where the lag sum is zero
    out.gain[k] = k + 1 < n ? std::max(0.0, corr[k + 1]) : 0.0;
    out.loss[k] = g[k] * S;
    out.df[k] = out.gain[k] - out.loss[k];
  }
  return out;
}

inline RhsOutput<double> rhs_separable_fast(const ClusterState<double>& f, const SequenceFn& r) {
  return rhs_separable_fast(std::span<const double>(f.values()), r);
}

/// Fast path for kernels with pure product structure; throws
/// contract_violation otherwise.
inline RhsOutput<double> rhs_separable_fast(const ClusterState<double>& f, const Kernel& kernel) {
  if (!kernel.is_product())
    throw contract_violation("fast right-hand side needs a product kernel, got " + kernel.id());
  return rhs_separable_fast(std::span<const double>(f.values()),
                            [&kernel](Index i) { return kernel.product_factor(i); });
}

/// Dispatching right-hand side: product part through the FFT path, any
/// separable residual and all other families through the naive loops.
inline RhsOutput<double> rhs(const ClusterState<double>& f, const Kernel& kernel) {
  if (kernel.is_product()) return rhs_separable_fast(f, kernel);
  if (!kernel.has_product_part()) return rhs_naive(f, kernel);
  RhsOutput<double> out = rhs_separable_fast(
      std::span<const double>(f.values()), [&kernel](Index i) { return kernel.product_factor(i); });
  RhsOutput<double> rest(f.size());
  detail::naive_rhs_into<double>([&kernel](Index i, Index j) { return kernel.residual(i, j); },
                                 std::span<const double>(f.values()), rest);
  for (std::size_t k = 0; k < f.size(); ++k) {
    out.gain[k] += rest.gain[k];
    out.loss[k] += rest.loss[k];
    out.df[k] = out.gain[k] - out.loss[k];
  }
  return out;
}

template <typename Real = double>
struct DissipationPair {
  Real lower{0}; ///< sum_{j>=2} sum_{k<j} (theta_j - theta_{j-k}) a_{j,k} f_j f_k
  Real diag{0};  ///< sum_j sum_{k>=j} theta_j a_{j,k} f_j f_k
  Real total() const { return lower + diag; }
};

namespace detail {

template <typename Real, typename Rates>
DissipationPair<Real> dissipation_into(const Rates& a, std::span<const Real> f,
                                       std::span<const double> theta) {
  const std::size_t n = f.size();
  CompensatedSum<Real> lower;
  CompensatedSum<Real> diag;
  for (Index j = 1; j <= n; ++j) {
    const Real fj = f[j - 1];
    if (fj == Real(0)) continue;
    Real row_lower(0);
    for (Index k = 1; k < j; ++k)
      row_lower += Real(theta[j - 1] - theta[j - k - 1]) * Real(a(j, k)) * f[k - 1];
    Real row_diag(0);
    for (Index k = j; k <= n; ++k) row_diag += Real(a(j, k)) * f[k - 1];
    lower += fj * row_lower;
    diag += Real(theta[j - 1]) * fj * row_diag;
  }
  return {lower.value(), diag.value()};
}

template <typename Real, typename Rates>
Real min_dissipation_into(const Rates& a, std::span<const Real> f) {
  const std::size_t n = f.size();
  CompensatedSum<Real> s;
  for (Index j = 1; j <= n; ++j) {
    if (f[j - 1] == Real(0)) continue;
    Real row(0);
    for (Index k = 1; k <= n; ++k)
      row += Real(double(std::min(j, k))) * Real(a(j, k)) * f[k - 1];
    s += f[j - 1] * row;
  }
  return s.value();
}

} // namespace detail

/// The two double sums balancing d/dt sum theta_j f_j along the flow.
template <typename State>
auto dissipation_density(const State& f, const Kernel& kernel, const WeightSequence& theta) {
  using Real = typename State::value_type;
  std::vector<Real> v(f.begin(), f.end());
  const std::vector<double> th = theta.evaluate(f.size());
  return kernel.visit([&](const auto& k) {
    return detail::dissipation_into<Real>(k, std::span<const Real>(v), std::span<const double>(th));
  });
}

/// sum_{j,k<=n} min(j,k) a_{j,k} f_j f_k
template <typename State>
auto min_dissipation_density(const State& f, const Kernel& kernel) {
  using Real = typename State::value_type;
  std::vector<Real> v(f.begin(), f.end());
  return kernel.visit(
      [&](const auto& k) { return detail::min_dissipation_into<Real>(k, std::span<const Real>(v)); });
}

/// sum_{j,k<=n} a_{j,k} f_j f_k
template <typename State>
auto interaction_density(const State& f, const Kernel& kernel) {
  using Real = typename State::value_type;
  CompensatedSum<Real> s;
  kernel.visit([&](const auto& k) {
    for (Index j = 1; j <= f.size(); ++j) {
      Real row(0);
      for (Index l = 1; l <= f.size(); ++l) row += Real(k(j, l)) * f[l - 1];
      s += f[j - 1] * row;
    }
  });
  return s.value();
}

template <typename Real>
Real sum_abs(const std::vector<Real>& v) {
  using std::abs;
  CompensatedSum<Real> s;
  for (const Real& x : v) s += abs(x);
  return s.value();
}

/// Right-hand side of the augmented system: df together with the rates of
/// every co-integrated functional. Accumulator layout:
///   [0] min-dissipation density, [1] sum_i |df_i|,
///   [2+2w] lower sum for weight w, [3+2w] diagonal sum for weight w.
template <typename Real = double>
class FlowEvaluator {
public:
  static constexpr std::size_t kMinDissipation = 0;
  static constexpr std::size_t kAbsDerivative = 1;
  static constexpr std::size_t kFirstWeight = 2;

  FlowEvaluator(const Kernel& kernel, Index n, const std::vector<WeightSequence>& weights)
      : n_(n), rates_(kernel, n), out_(n) {
    thetas_.reserve(weights.size());
    for (const auto& w : weights) thetas_.push_back(w.evaluate(n));
  }

  Index size() const { return n_; }
  std::size_t accumulator_count() const { return kFirstWeight + 2 * thetas_.size(); }

  /// Writes df into dfdt (size n) and the accumulator rates into dacc.
  void operator()(std::span<const Real> f, std::span<Real> dfdt, std::span<Real> dacc) {
    Real min_rate(0);
    detail::naive_rhs_into<Real>(rates_, f, out_, &min_rate);
    std::copy(out_.df.begin(), out_.df.end(), dfdt.begin());
    dacc[kMinDissipation] = min_rate;
    dacc[kAbsDerivative] = sum_abs(out_.df);
    for (std::size_t w = 0; w < thetas_.size(); ++w) {
      const auto d = detail::dissipation_into<Real>(rates_, f, std::span<const double>(thetas_[w]));
      dacc[kFirstWeight + 2 * w] = d.lower;
      dacc[kFirstWeight + 2 * w + 1] = d.diag;
    }
  }

  const RhsOutput<Real>& last() const { return out_; }

private:
  Index n_;
  RateMatrix rates_;
  std::vector<std::vector<double>> thetas_;
  RhsOutput<Real> out_;
};

} // namespace rbk

#endif // RBK_TRUNCATION_HPP
