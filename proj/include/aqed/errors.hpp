#pragma once

#include <stdexcept>
#include <string>

namespace aqed {

// Invalid argument outside an operation's mathematical domain (k = 0, dt <= 0, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Requested feature the toolkit deliberately does not support (non-radial cutoffs, N > 2, ...).
class UnsupportedError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Non-finite values, solver breakdown, or an invariant violated at runtime.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Fock-space truncation lost more norm than the configured bound allows.
class TruncationError : public NumericalError {
 public:
  TruncationError(const std::string& what, double leakage)
      : NumericalError(what), leakage_(leakage) {}
  double leakage() const noexcept { return leakage_; }

 private:
  double leakage_;
};

// Tensor product space would exceed the amplitude cap.
class DimensionError : public std::length_error {
 public:
  using std::length_error::length_error;
};

}  // namespace aqed
