#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pinneig {

/// Rejection sampling could not find enough interior points.
class DegenerateDomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A loss or residual evaluated to a non-finite value.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, std::ptrdiff_t point_index = -1)
      : std::runtime_error(point_index >= 0
                               ? what + " (at collocation point " + std::to_string(point_index) + ")"
                               : what),
        point_index_(point_index) {}

  /// Index of the offending collocation point, or -1 when not tied to a point.
  std::ptrdiff_t point_index() const noexcept { return point_index_; }

 private:
  std::ptrdiff_t point_index_;
};

/// Invalid run configuration; the message names the key and the violated constraint.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pinneig
