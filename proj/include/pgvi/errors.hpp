#pragma once

#include <stdexcept>
#include <string>

namespace pgvi {

/// Thrown when a linear-algebra step fails beyond repair (e.g. a covariance
/// matrix that stays indefinite after jitter escalation).
class NumericalError : public std::runtime_error {
public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace pgvi
