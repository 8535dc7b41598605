#ifndef RBK_ERRORS_HPP
#define RBK_ERRORS_HPP

#include <stdexcept>

namespace rbk {

/// An operation was called outside its structural contract, e.g. the fast
/// path on a kernel without product structure.
class contract_violation : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

/// Inputs are inconsistent with each other (missing accumulator, mismatched
/// grids, malformed config field).
class configuration_error : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// A mathematical precondition of a check does not hold (e.g. an uncertified
/// bound sequence).
class precondition_error : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

} // namespace rbk

#endif // RBK_ERRORS_HPP
