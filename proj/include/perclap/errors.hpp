#pragma once

#include <stdexcept>
#include <string>

namespace perclap {

/// Invalid user-supplied configuration (box dimensions, ranges, config keys).
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// Eigensolver or factorization failure; the message carries cluster provenance.
class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Series truncation too short for the requested accuracy.
class PrecisionError : public std::runtime_error {
public:
  PrecisionError(const std::string& what, double neglected_bound)
      : std::runtime_error(what), neglected_bound_(neglected_bound) {}
  double neglected_bound() const noexcept { return neglected_bound_; }

private:
  double neglected_bound_;
};

/// Too few usable points for a regression.
class InsufficientDataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Exhaustive search requested above its size cutoff.
class UnsupportedSizeError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace perclap
