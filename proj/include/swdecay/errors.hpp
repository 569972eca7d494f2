#pragma once

#include <stdexcept>
#include <string>

namespace swdecay {

// Bad inputs: malformed files, parameters outside their validity region,
// inconsistent design specifications. Maps to CLI exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failures: singular systems, factorization failures, degenerate
// data, non-convergence surfaced as an error. Maps to CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace swdecay
