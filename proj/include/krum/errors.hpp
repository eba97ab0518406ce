#pragma once

#include <stdexcept>
#include <string>

namespace krum {

// Malformed arguments: dimension mismatch, non-finite components, bad ids,
// zero weights.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A documented precondition on (n, f, m, ...) does not hold.
class PreconditionViolation : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// The requested attack cannot be mounted in this configuration.
class AttackInapplicable : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// An estimator is paired with a cost function it does not support.
class UnsupportedCombination : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Learning-rate schedule outside the admissible family.
class InvalidSchedule : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Configuration document rejected; the message names the offending key.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace krum
