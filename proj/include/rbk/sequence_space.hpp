#ifndef RBK_SEQUENCE_SPACE_HPP
#define RBK_SEQUENCE_SPACE_HPP

#include <cmath>
#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "rbk/kernel.hpp"
#include "rbk/summation.hpp"

namespace rbk {

/// Truncated nonnegative state (f_1, ..., f_n). Slot k holds f_{k+1}; use
/// at(i) for 1-based access.
template <typename Real = double>
class ClusterState {
public:
  using value_type = Real;

  ClusterState() = default;
  explicit ClusterState(std::size_t n) : f_(n, Real(0)) {}
  explicit ClusterState(std::vector<Real> f) : f_(std::move(f)) {
    for (std::size_t k = 0; k < f_.size(); ++k) {
      using std::isfinite;
      if (!(f_[k] >= 0) || !isfinite(f_[k]))
        throw std::invalid_argument("cluster state entry f_" + std::to_string(k + 1) +
                                    " is negative or not finite");
    }
  }

  std::size_t size() const { return f_.size(); }
  const Real& operator[](std::size_t k) const { return f_[k]; }
  Real& operator[](std::size_t k) { return f_[k]; }
  const Real& at(Index i) const { return f_.at(i - 1); }

  const std::vector<Real>& values() const { return f_; }
  std::vector<Real>& values() { return f_; }

  auto begin() const { return f_.begin(); }
  auto end() const { return f_.end(); }

  friend bool operator==(const ClusterState&, const ClusterState&) = default;

private:
  std::vector<Real> f_;
};

/// Real weight sequence (theta_i)_{i>=1} with optional declared shape flags.
class WeightSequence {
public:
  WeightSequence() = default;
  WeightSequence(std::string name, SequenceFn fn, bool nonnegative = false,
                 bool nondecreasing = false)
      : name_(std::move(name)), fn_(std::move(fn)), nonnegative_(nonnegative),
        nondecreasing_(nondecreasing) {
    if (!fn_) throw std::invalid_argument("weight sequence needs a function");
  }

  static WeightSequence constant(double v) {
    return {"const(" + format_real(v) + ")", [v](Index) { return v; }, v >= 0.0, true};
  }

  /// theta_i = i
  static WeightSequence identity() {
    return {"identity", [](Index i) { return double(i); }, true, true};
  }

  /// theta_i = 0 for i < m, theta_i = i for i >= m.
  static WeightSequence tail(Index m) {
    if (m < 1) throw std::invalid_argument("tail weight needs m >= 1");
    return {tail_name(m), [m](Index i) { return i >= m ? double(i) : 0.0; }, true, true};
  }

  static std::string tail_name(Index m) { return "tail:" + std::to_string(m); }

  /// theta_i = A_i^power for i >= m, zero below.
  static WeightSequence bound_tail(const BoundSequence& A, Index m, int power = 1) {
    auto vals = std::make_shared<const std::vector<double>>(A.values());
    return {"bound_tail:" + std::to_string(m) + ":" + std::to_string(power),
            [vals, m, power](Index i) {
              if (i < m) return 0.0;
              const double a = (*vals).at(i - 1);
              return power == 1 ? a : std::pow(a, power);
            },
            true, true};
  }

  static WeightSequence from_values(std::string name, std::vector<double> v) {
    bool nonneg = true;
    bool nondec = true;
    for (std::size_t k = 0; k < v.size(); ++k) {
      nonneg = nonneg && v[k] >= 0.0;
      if (k > 0) nondec = nondec && v[k] >= v[k - 1];
    }
    auto vals = std::make_shared<const std::vector<double>>(std::move(v));
    return {std::move(name), [vals](Index i) { return vals->at(i - 1); }, nonneg, nondec};
  }

  const std::string& name() const { return name_; }
  bool nonnegative() const { return nonnegative_; }
  bool nondecreasing() const { return nondecreasing_; }
  double operator()(Index i) const { return fn_(i); }

  /// Values theta_1..theta_n.
  std::vector<double> evaluate(Index n) const {
    std::vector<double> v(n);
    for (Index i = 1; i <= n; ++i) v[i - 1] = fn_(i);
    return v;
  }

  /// True when the declared flags hold on [1,n].
  bool flags_hold(Index n) const {
    double prev = 0.0;
    for (Index i = 1; i <= n; ++i) {
      const double v = fn_(i);
      if (nonnegative_ && v < 0.0) return false;
      if (nondecreasing_ && i > 1 && v < prev) return false;
      prev = v;
    }
    return true;
  }

private:
  std::string name_;
  SequenceFn fn_;
  bool nonnegative_ = false;
  bool nondecreasing_ = false;
};

// ---- moments ---------------------------------------------------------------

/// sum_j theta_j f_j
template <typename State>
auto weighted_moment(const State& f, const WeightSequence& theta) {
  using Real = typename State::value_type;
  CompensatedSum<Real> s;
  for (std::size_t k = 0; k < f.size(); ++k) s += Real(theta(k + 1)) * f[k];
  return s.value();
}

/// sum_i i^m f_i; norm_m(f, 0) is the total number, norm_m(f, 1) the mass.
template <typename State>
auto norm_m(const State& f, double m) {
  using Real = typename State::value_type;
  CompensatedSum<Real> s;
  for (std::size_t k = 0; k < f.size(); ++k) {
    const double w = m == 0.0 ? 1.0 : m == 1.0 ? double(k + 1) : std::pow(double(k + 1), m);
    s += Real(w) * f[k];
  }
  return s.value();
}

template <typename State>
auto norm_1(const State& f) {
  return norm_m(f, 1.0);
}

/// sum_{j=m}^n j f_j; zero when m > n.
template <typename State>
auto tail_first_moment(const State& f, Index m) {
  using Real = typename State::value_type;
  if (m < 1) throw std::invalid_argument("tail_first_moment needs m >= 1");
  CompensatedSum<Real> s;
  for (std::size_t k = m - 1; k < f.size(); ++k) s += Real(double(k + 1)) * f[k];
  return s.value();
}

/// sum_i A_i^power f_i with power in {1, 2}.
template <typename State>
auto a_moment(const State& f, const BoundSequence& A, int power = 1) {
  using Real = typename State::value_type;
  if (power != 1 && power != 2) throw std::invalid_argument("a_moment power must be 1 or 2");
  if (A.size() < f.size())
    throw std::invalid_argument("bound sequence shorter than the state");
  CompensatedSum<Real> s;
  for (std::size_t k = 0; k < f.size(); ++k) {
    const double a = A[k + 1];
    s += Real(power == 1 ? a : a * a) * f[k];
  }
  return s.value();
}

/// sum_{i>=m} A_i f_i
template <typename State>
auto a_tail_moment(const State& f, const BoundSequence& A, Index m) {
  using Real = typename State::value_type;
  CompensatedSum<Real> s;
  for (std::size_t k = m - 1; k < f.size(); ++k) s += Real(A[k + 1]) * f[k];
  return s.value();
}

// ---- initial conditions ----------------------------------------------------

/// Initial data families, defined for every index and realized at a chosen n
/// without renormalization.
class InitialCondition {
public:
  struct Monodisperse { double c; };
  struct Geometric { double c; double q; };
  /// f_i = c i^{-p} for i <= cutoff (cutoff == 0: no cutoff, needs p > 2).
  struct PowerLaw { double c; double p; Index cutoff; };
  struct Custom { std::vector<double> f; };

  static InitialCondition monodisperse(double c) {
    check_amplitude(c);
    return InitialCondition(Monodisperse{c});
  }

  static InitialCondition geometric(double c, double q) {
    check_amplitude(c);
    if (!(q > 0.0 && q < 1.0))
      throw std::invalid_argument("geometric initial condition needs 0 < q < 1, got q=" +
                                  format_real(q));
    return InitialCondition(Geometric{c, q});
  }

  static InitialCondition power_law(double c, double p, Index cutoff) {
    check_amplitude(c);
    if (!std::isfinite(p)) throw std::invalid_argument("power law needs finite p");
    if (cutoff == 0 && !(p > 2.0))
      throw std::invalid_argument("power law without cutoff needs p > 2 for a finite mass");
    return InitialCondition(PowerLaw{c, p, cutoff});
  }

  static InitialCondition custom(std::vector<double> f) {
    for (double v : f)
      if (!(v >= 0.0) || !std::isfinite(v))
        throw std::invalid_argument("custom initial condition entries must be >= 0");
    return InitialCondition(Custom{std::move(f)});
  }

  /// Reads `i,f` rows; unlisted indices are zero.
  static InitialCondition read_csv(std::istream& in, const std::string& source = "csv") {
    std::string line;
    std::size_t lineno = 0;
    bool header = false;
    std::vector<double> f;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      if (!header) {
        std::string h;
        for (char ch : line)
          if (ch != ' ') h += ch;
        if (h != "i,f")
          throw std::runtime_error(source + ":" + std::to_string(lineno) +
                                   ": expected header 'i,f'");
        header = true;
        continue;
      }
      std::istringstream ls(line);
      long long i = 0;
      char comma = 0;
      double v = 0;
      if (!(ls >> i >> comma >> v) || comma != ',' || i < 1)
        throw std::runtime_error(source + ":" + std::to_string(lineno) +
                                 ": malformed row, expected 'i,f' with i >= 1");
      if (!(v >= 0.0) || !std::isfinite(v))
        throw std::runtime_error(source + ":" + std::to_string(lineno) +
                                 ": f must be finite and >= 0");
      if (f.size() < std::size_t(i)) f.resize(i, 0.0);
      f[i - 1] = v;
    }
    if (!header) throw std::runtime_error(source + ": missing header 'i,f'");
    return custom(std::move(f));
  }

  static InitialCondition load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open initial condition '" + path + "'");
    return read_csv(in, path);
  }

  std::string id() const {
    return std::visit(
        [](const auto& ic) -> std::string {
          using T = std::decay_t<decltype(ic)>;
          if constexpr (std::is_same_v<T, Monodisperse>)
            return "monodisperse(c=" + format_real(ic.c) + ")";
          else if constexpr (std::is_same_v<T, Geometric>)
            return "geometric(c=" + format_real(ic.c) + ",q=" + format_real(ic.q) + ")";
          else if constexpr (std::is_same_v<T, PowerLaw>)
            return "power_law(c=" + format_real(ic.c) + ",p=" + format_real(ic.p) +
                   ",cutoff=" + std::to_string(ic.cutoff) + ")";
          else
            return "custom(len=" + std::to_string(ic.f.size()) + ")";
        },
        family_);
  }

  /// f_i^in for any i >= 1.
  double value(Index i) const {
    return std::visit(
        [i](const auto& ic) -> double {
          using T = std::decay_t<decltype(ic)>;
          if constexpr (std::is_same_v<T, Monodisperse>)
            return i == 1 ? ic.c : 0.0;
          else if constexpr (std::is_same_v<T, Geometric>)
            return ic.c * std::pow(ic.q, double(i));
          else if constexpr (std::is_same_v<T, PowerLaw>)
            return (ic.cutoff == 0 || i <= ic.cutoff) ? ic.c * std::pow(double(i), -ic.p) : 0.0;
          else
            return i <= ic.f.size() ? ic.f[i - 1] : 0.0;
        },
        family_);
  }

  /// Truncation to indices 1..n, computed in Real.
  template <typename Real = double>
  ClusterState<Real> realize(Index n) const {
    if (n < 1) throw std::invalid_argument("truncation size n must be >= 1");
    std::vector<Real> f(n, Real(0));
    if (auto* g = std::get_if<Geometric>(&family_)) {
      Real v = Real(g->c);
      const Real q = Real(g->q);
      for (Index i = 1; i <= n; ++i) {
        v *= q;
        f[i - 1] = v;
      }
    } else {
      for (Index i = 1; i <= n; ++i) f[i - 1] = Real(value(i));
    }
    return ClusterState<Real>(std::move(f));
  }

  /// sum_{j>n} j f_j^in, the first moment dropped by truncating at n.
  double discarded_tail(Index n) const {
    return std::visit(
        [n](const auto& ic) -> double {
          using T = std::decay_t<decltype(ic)>;
          if constexpr (std::is_same_v<T, Monodisperse>) {
            return n >= 1 ? 0.0 : ic.c;
          } else if constexpr (std::is_same_v<T, Geometric>) {
            const double q = ic.q;
            const double nn = double(n);
            return ic.c * std::pow(q, nn + 1.0) * ((nn + 1.0) - nn * q) / ((1.0 - q) * (1.0 - q));
          } else if constexpr (std::is_same_v<T, PowerLaw>) {
            CompensatedSum<double> s;
            if (ic.cutoff != 0) {
              for (Index j = n + 1; j <= ic.cutoff; ++j) s += ic.c * std::pow(double(j), 1.0 - ic.p);
              return s.value();
            }
            // explicit sum to N, integral bound for the remainder
            const Index N = std::max<Index>(n, 1) * 64 + 100000;
            for (Index j = n + 1; j <= N; ++j) s += ic.c * std::pow(double(j), 1.0 - ic.p);
            s += ic.c * std::pow(double(N) + 0.5, 2.0 - ic.p) / (ic.p - 2.0);
            return s.value();
          } else {
            CompensatedSum<double> s;
            for (std::size_t j = n + 1; j <= ic.f.size(); ++j) s += double(j) * ic.f[j - 1];
            return s.value();
          }
        },
        family_);
  }

  /// Full first moment sum_{j>=1} j f_j^in.
  double first_moment() const { return discarded_tail(0); }

  /// Same family with amplitude rescaled so the full first moment equals mass.
  InitialCondition scaled_to_mass(double mass) const {
    const double m = first_moment();
    if (m == 0.0) return *this;
    const double s = mass / m;
    return std::visit(
        [s](const auto& ic) -> InitialCondition {
          using T = std::decay_t<decltype(ic)>;
          T copy = ic;
          if constexpr (std::is_same_v<T, Custom>) {
            for (double& v : copy.f) v *= s;
          } else {
            copy.c *= s;
          }
          return InitialCondition(copy);
        },
        family_);
  }

  template <typename T>
  const T* as() const { return std::get_if<T>(&family_); }

private:
  using Family = std::variant<Monodisperse, Geometric, PowerLaw, Custom>;
  explicit InitialCondition(Family f) : family_(std::move(f)) {}

  static void check_amplitude(double c) {
    if (!(c >= 0.0) || !std::isfinite(c))
      throw std::invalid_argument("initial amplitude c must be finite and >= 0");
  }

  Family family_;
};

} // namespace rbk

#endif // RBK_SEQUENCE_SPACE_HPP
