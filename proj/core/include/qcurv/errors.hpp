#pragma once

#include <stdexcept>
#include <string>

namespace qcurv {

// Bad input: violated preconditions, dimension mismatches, illegal parameters.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure: divergence, under-resolution, degenerate spectra.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

}  // namespace qcurv
