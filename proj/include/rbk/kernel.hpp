#ifndef RBK_KERNEL_HPP
#define RBK_KERNEL_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace rbk {

/// Cluster index, 1-based throughout the library.
using Index = std::size_t;

using SequenceFn = std::function<double(Index)>;
using RateFn = std::function<double(Index, Index)>;

enum class KernelFamily { Constant, Sum, Product, Separable, Table, Custom };

inline const char* to_string(KernelFamily f) {
  switch (f) {
  case KernelFamily::Constant: return "constant";
  case KernelFamily::Sum: return "sum";
  case KernelFamily::Product: return "product";
  case KernelFamily::Separable: return "separable";
  case KernelFamily::Table: return "table";
  case KernelFamily::Custom: return "custom";
  }
  return "?";
}

/// Shortest text that reads back to the same double.
inline std::string format_real(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

/// Symmetric n x n table stored as its upper triangle.
class SymmetricTable {
public:
  SymmetricTable() = default;
  explicit SymmetricTable(Index n) : n_(n), data_(n * (n + 1) / 2, 0.0) {}

  Index size() const { return n_; }

  double operator()(Index i, Index j) const { return data_[offset(i, j)]; }

  double at(Index i, Index j) const {
    check(i, j);
    return data_[offset(i, j)];
  }

  void set(Index i, Index j, double v) {
    check(i, j);
    data_[offset(i, j)] = v;
  }

private:
  void check(Index i, Index j) const {
    if (i < 1 || j < 1 || i > n_ || j > n_) {
      throw std::out_of_range("rate table index (" + std::to_string(i) + "," +
                              std::to_string(j) + ") outside [1," +
                              std::to_string(n_) + "]");
    }
  }

  // row-major upper triangle, i <= j
  std::size_t offset(Index i, Index j) const {
    if (i > j) std::swap(i, j);
    const std::size_t r = i - 1;
    return r * n_ - r * (r - 1) / 2 + (j - i);
  }

  Index n_ = 0;
  std::vector<double> data_;
};

namespace detail {

struct ConstantRate {
  double c;
  double operator()(Index, Index) const { return c; }
};

struct SumRate {
  double alpha;
  double operator()(Index i, Index j) const {
    if (alpha == 1.0) return double(i) + double(j);
    return std::pow(double(i), alpha) + std::pow(double(j), alpha);
  }
};

struct ProductRate {
  double beta;
  double factor(Index i) const {
    return beta == 1.0 ? double(i) : std::pow(double(i), beta);
  }
  double operator()(Index i, Index j) const { return factor(i) * factor(j); }
};

struct SeparableRate {
  SequenceFn r;
  RateFn residual; // empty when identically zero
  std::string description;
  double operator()(Index i, Index j) const {
    const double base = r(i) * r(j);
    return residual ? base + residual(i, j) : base;
  }
};

struct TableRate {
  std::shared_ptr<const SymmetricTable> table;
  double operator()(Index i, Index j) const { return table->at(i, j); }
};

struct CustomRate {
  RateFn fn;
  std::string name;
  double operator()(Index i, Index j) const { return fn(i, j); }
};

} // namespace detail

/// Symmetric nonnegative rate coefficients a_{i,j}, tagged by family.
/// Immutable after construction.
class Kernel {
public:
  static Kernel constant(double c) {
    require(std::isfinite(c) && c >= 0.0, "constant kernel needs c >= 0");
    return Kernel(detail::ConstantRate{c});
  }

  /// a_{i,j} = i^alpha + j^alpha
  static Kernel sum(double alpha) {
    require(std::isfinite(alpha), "sum kernel needs finite alpha");
    return Kernel(detail::SumRate{alpha});
  }

  /// a_{i,j} = (i j)^beta
  static Kernel product(double beta) {
    require(std::isfinite(beta), "product kernel needs finite beta");
    return Kernel(detail::ProductRate{beta});
  }

  /// a_{i,j} = r_i r_j + residual(i,j), r_i > 0, residual >= 0 and symmetric.
  static Kernel separable(SequenceFn r, RateFn residual = {},
                          std::string description = "separable") {
    require(static_cast<bool>(r), "separable kernel needs an r sequence");
    return Kernel(detail::SeparableRate{std::move(r), std::move(residual),
                                        std::move(description)});
  }

  static Kernel table(SymmetricTable t) {
    require(t.size() >= 1, "table kernel needs at least one row");
    for (Index i = 1; i <= t.size(); ++i)
      for (Index j = i; j <= t.size(); ++j)
        require(std::isfinite(t(i, j)) && t(i, j) >= 0.0,
                "table kernel entries must be finite and >= 0");
    return Kernel(detail::TableRate{std::make_shared<const SymmetricTable>(std::move(t))});
  }

  static Kernel custom(RateFn fn, std::string name = "custom") {
    require(static_cast<bool>(fn), "custom kernel needs a rate function");
    return Kernel(detail::CustomRate{std::move(fn), std::move(name)});
  }

  KernelFamily family() const { return static_cast<KernelFamily>(impl_.index()); }

  /// Human-readable identifier including parameters.
  std::string id() const {
    return std::visit(
        [](const auto& k) -> std::string {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, detail::ConstantRate>)
            return "constant(c=" + format_real(k.c) + ")";
          else if constexpr (std::is_same_v<K, detail::SumRate>)
            return "sum(alpha=" + format_real(k.alpha) + ")";
          else if constexpr (std::is_same_v<K, detail::ProductRate>)
            return "product(beta=" + format_real(k.beta) + ")";
          else if constexpr (std::is_same_v<K, detail::SeparableRate>)
            return "separable(" + k.description + ")";
          else if constexpr (std::is_same_v<K, detail::TableRate>)
            return "table(n=" + std::to_string(k.table->size()) + ")";
          else
            return "custom(" + k.name + ")";
        },
        impl_);
  }

  /// Table kernels only; other families are defined for every index.
  std::optional<Index> max_index() const {
    if (auto* t = std::get_if<detail::TableRate>(&impl_)) return t->table->size();
    return std::nullopt;
  }

  double operator()(Index i, Index j) const {
    if (i < 1 || j < 1) throw std::out_of_range("kernel indices are 1-based");
    return std::visit([&](const auto& k) { return k(i, j); }, impl_);
  }

  double eval(Index i, Index j) const { return (*this)(i, j); }

  /// Calls fn with the concrete family evaluator, so hot loops avoid the
  /// per-element dispatch.
  template <typename F>
  decltype(auto) visit(F&& fn) const {
    return std::visit(std::forward<F>(fn), impl_);
  }

  /// True when a_{i,j} = r_i r_j exactly in structure (no residual part).
  bool is_product() const {
    switch (family()) {
    case KernelFamily::Constant:
    case KernelFamily::Product: return true;
    case KernelFamily::Separable:
      return !std::get<detail::SeparableRate>(impl_).residual;
    default: return false;
    }
  }

  /// True when a_{i,j} has an r_i r_j part that the fast path can use.
  bool has_product_part() const {
    return is_product() || family() == KernelFamily::Separable;
  }

  /// r_i of the product part.
  double product_factor(Index i) const {
    switch (family()) {
    case KernelFamily::Constant: return std::sqrt(std::get<detail::ConstantRate>(impl_).c);
    case KernelFamily::Product: return std::get<detail::ProductRate>(impl_).factor(i);
    case KernelFamily::Separable: return std::get<detail::SeparableRate>(impl_).r(i);
    default:
      throw std::logic_error("kernel " + id() + " has no product structure");
    }
  }

  /// a_{i,j} - r_i r_j for separable kernels; zero for pure product kernels.
  double residual(Index i, Index j) const {
    if (auto* s = std::get_if<detail::SeparableRate>(&impl_))
      return s->residual ? s->residual(i, j) : 0.0;
    if (is_product()) return 0.0;
    throw std::logic_error("kernel " + id() + " has no product structure");
  }

  /// Checks symmetry, nonnegativity and finiteness on [1,n]^2. Throws
  /// std::invalid_argument naming the first offending pair.
  void validate(Index n) const {
    if (auto m = max_index(); m && n > *m)
      throw std::out_of_range("kernel " + id() + " is only defined up to index " +
                              std::to_string(*m));
    visit([&](const auto& k) {
      for (Index i = 1; i <= n; ++i) {
        for (Index j = i; j <= n; ++j) {
          const double a = k(i, j);
          const double b = k(j, i);
          if (!std::isfinite(a) || a < 0.0)
            throw std::invalid_argument("kernel " + id() + ": a(" + std::to_string(i) +
                                        "," + std::to_string(j) + ") = " + format_real(a) +
                                        " is not a finite nonnegative rate");
          if (a != b)
            throw std::invalid_argument("kernel " + id() + " is not symmetric at (" +
                                        std::to_string(i) + "," + std::to_string(j) + ")");
        }
      }
      if constexpr (std::is_same_v<std::decay_t<decltype(k)>, detail::SeparableRate>) {
        for (Index i = 1; i <= n; ++i)
          if (!(k.r(i) > 0.0))
            throw std::invalid_argument("separable kernel needs r_i > 0, fails at i=" +
                                        std::to_string(i));
      }
    });
  }

private:
  using Impl = std::variant<detail::ConstantRate, detail::SumRate, detail::ProductRate,
                            detail::SeparableRate, detail::TableRate, detail::CustomRate>;

  explicit Kernel(Impl impl) : impl_(std::move(impl)) {}

  static void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
  }

  Impl impl_;
};

/// Non-decreasing positive sequence A_1 <= A_2 <= ..., A_1 >= 1, stored for
/// indices 1..size().
class BoundSequence {
public:
  BoundSequence() = default;

  explicit BoundSequence(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw std::invalid_argument("bound sequence is empty");
    if (!(values_.front() >= 1.0))
      throw std::invalid_argument("bound sequence needs A_1 >= 1");
    for (std::size_t k = 0; k < values_.size(); ++k) {
      if (!std::isfinite(values_[k]))
        throw std::invalid_argument("bound sequence entries must be finite");
      if (k > 0 && values_[k] < values_[k - 1])
        throw std::invalid_argument("bound sequence must be non-decreasing, fails at i=" +
                                    std::to_string(k + 1));
    }
  }

  static BoundSequence from_function(const SequenceFn& fn, Index n) {
    std::vector<double> v(n);
    for (Index i = 1; i <= n; ++i) v[i - 1] = fn(i);
    return BoundSequence(std::move(v));
  }

  Index size() const { return values_.size(); }
  double operator[](Index i) const { return values_[i - 1]; }
  double at(Index i) const {
    if (i < 1 || i > values_.size())
      throw std::out_of_range("bound sequence index " + std::to_string(i) + " outside [1," +
                              std::to_string(values_.size()) + "]");
    return values_[i - 1];
  }
  const std::vector<double>& values() const { return values_; }

private:
  std::vector<double> values_;
};

/// A_i = 1 + max_{1<=j,k<=i} a_{j,k}, which dominates the kernel on [1,n]^2.
inline BoundSequence dominating_sequence(const Kernel& kernel, Index n) {
  if (n < 1) throw std::invalid_argument("dominating_sequence needs n >= 1");
  std::vector<double> A(n);
  double running = 0.0;
  kernel.visit([&](const auto& k) {
    for (Index i = 1; i <= n; ++i) {
      for (Index j = 1; j <= i; ++j) running = std::max(running, k(i, j));
      A[i - 1] = 1.0 + running;
    }
  });
  return BoundSequence(std::move(A));
}

struct BoundCheck {
  bool holds = true;
  Index worst_i = 1;
  Index worst_j = 1;
  double worst_ratio = 0.0; // max a_{i,j} / (A_i A_j)
};

/// Scans [1,n]^2 for a_{i,j} <= A_i A_j.
inline BoundCheck verify_bound(const Kernel& kernel, const BoundSequence& A, Index n) {
  if (A.size() < n)
    throw std::invalid_argument("bound sequence has " + std::to_string(A.size()) +
                                " entries, need " + std::to_string(n));
  BoundCheck out;
  kernel.visit([&](const auto& k) {
    for (Index i = 1; i <= n; ++i) {
      for (Index j = i; j <= n; ++j) {
        const double a = k(i, j);
        const double cap = A[i] * A[j];
        const double ratio = a / cap;
        if (a > cap) out.holds = false;
        if (ratio > out.worst_ratio) {
          out.worst_ratio = ratio;
          out.worst_i = i;
          out.worst_j = j;
        }
      }
    }
  });
  return out;
}

/// Reads a symmetric table from CSV with header `i,j,a`. Unlisted pairs are
/// zero; a pair listed in both orders must agree.
inline SymmetricTable read_rate_table_csv(std::istream& in, const std::string& source = "csv") {
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::tuple<Index, Index, double>> rows;
  bool header_seen = false;
  Index n = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      std::string h;
      for (char c : line)
        if (c != ' ') h += c;
      if (h != "i,j,a")
        throw std::runtime_error(source + ":" + std::to_string(lineno) +
                                 ": expected header 'i,j,a'");
      header_seen = true;
      continue;
    }
    std::istringstream ls(line);
    long long i = 0, j = 0;
    double a = 0;
    char c1 = 0, c2 = 0;
    if (!(ls >> i >> c1 >> j >> c2 >> a) || c1 != ',' || c2 != ',' || i < 1 || j < 1)
      throw std::runtime_error(source + ":" + std::to_string(lineno) +
                               ": malformed row, expected 'i,j,a' with i,j >= 1");
    rows.emplace_back(Index(i), Index(j), a);
    n = std::max<Index>(n, std::max(Index(i), Index(j)));
  }
  if (!header_seen || n == 0) throw std::runtime_error(source + ": no table rows");
  SymmetricTable t(n);
  std::vector<char> seen(n * n, 0);
  for (auto [i, j, a] : rows) {
    if (!std::isfinite(a) || a < 0.0)
      throw std::runtime_error(source + ": negative or non-finite rate at (" +
                               std::to_string(i) + "," + std::to_string(j) + ")");
    const bool other = seen[(j - 1) * n + (i - 1)];
    if (other && t(i, j) != a)
      throw std::runtime_error(source + ": asymmetric rates at (" + std::to_string(i) +
                               "," + std::to_string(j) + ")");
    t.set(i, j, a);
    seen[(i - 1) * n + (j - 1)] = 1;
  }
  return t;
}

inline SymmetricTable load_rate_table_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open rate table '" + path + "'");
  return read_rate_table_csv(in, path);
}

} // namespace rbk

#endif // RBK_KERNEL_HPP
