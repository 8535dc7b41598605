#ifndef RBK_SUMMATION_HPP
#define RBK_SUMMATION_HPP

#include <cmath>

namespace rbk {

/// Neumaier-compensated accumulator. Works for any scalar with +, -, abs.
template <typename Real = double>
class CompensatedSum {
public:
  CompensatedSum() = default;
  explicit CompensatedSum(Real init) : sum_(init) {}

  CompensatedSum& operator+=(const Real& x) {
    using std::abs;
    const Real t = sum_ + x;
    if (abs(sum_) >= abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
    return *this;
  }

  CompensatedSum& operator-=(const Real& x) { return *this += Real(-x); }

  Real value() const { return sum_ + comp_; }

private:
  Real sum_{0};
  Real comp_{0};
};

} // namespace rbk

#endif // RBK_SUMMATION_HPP
