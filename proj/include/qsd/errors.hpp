#pragma once

#include <stdexcept>
#include <string>

namespace qsd {

// Invalid or inconsistent user-supplied configuration.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Network config text could not be parsed; message carries line/field info.
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Structural misuse of an operation (dimension mismatch, index out of range).
struct StructuralError : std::logic_error {
  explicit StructuralError(const std::string& msg) : std::logic_error(msg) {}
};

// A paired-path lookup ran past the generated horizon. The message includes
// a sizing hint (required internal time) so callers can regenerate.
struct HorizonExceeded : std::runtime_error {
  HorizonExceeded(const std::string& msg, double required)
      : std::runtime_error(msg), required_internal_time(required) {}
  double required_internal_time;
};

// The shared uniform pool of a regeneration sequence ran out.
struct RegenExhausted : ConfigError {
  explicit RegenExhausted(const std::string& msg) : ConfigError(msg) {}
};

// Numerical failure (non-convergence, degenerate density, invalid matrix).
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Contraction factor alpha = exp(-gamma T) >= 1; the bound formula does not apply.
struct DivergentBound : std::runtime_error {
  explicit DivergentBound(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace qsd
