#pragma once

#include <stdexcept>
#include <string>

namespace sysid {

// Invalid argument values or inconsistent dimensions.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A documented precondition of an algorithm does not hold (N < 2T, T < n+1, ...).
class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A matrix that must have full column rank does not.
class RankError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// SGD iterate became non-finite or exceeded the divergence threshold.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Resolvent evaluated at (or numerically on top of) an eigenvalue.
class SingularityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The Markov estimate admits no usable set of matching frequencies.
class DegenerateEstimateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sysid
