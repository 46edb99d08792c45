#ifndef BATHYROM_ERRORS_HPP
#define BATHYROM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace bathyrom {

/// Bad user input: configs, flags, inconsistent shapes, out-of-range values.
/// The CLI maps these to exit status 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runtime failures (I/O, malformed files, numerics). Exit status 2.
class RuntimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public RuntimeError {
 public:
  using RuntimeError::RuntimeError;
};

/// Malformed container file: bad magic, unsupported version, truncation,
/// dimension mismatch. The message names the specific defect.
class FormatError : public RuntimeError {
 public:
  using RuntimeError::RuntimeError;
};

/// A bathymetry/BC pair the forward model cannot wet: some cross-section
/// has no node below the water surface.
class InfeasibleBathymetry : public RuntimeError {
 public:
  using RuntimeError::RuntimeError;
};

class NumericsError : public RuntimeError {
 public:
  using RuntimeError::RuntimeError;
};

}  // namespace bathyrom

#endif  // BATHYROM_ERRORS_HPP
