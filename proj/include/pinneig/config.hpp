#pragma once

#include <cstdint>
#include <string>

#include "pinneig/geometry.hpp"
#include "pinneig/residual.hpp"
#include "pinneig/scan.hpp"

namespace pinneig {

struct OracleConfig {
  int count = 4;       ///< distinct reference eigenvalues to compute
  int fd_grid = 128;   ///< finite-difference resolution when no closed form exists
};

struct ValidateConfig {
  /// Added to each estimate's grid resolution when comparing to the oracle.
  double extra_tolerance = 2e-3;
};

struct ExportConfig {
  int resolution = 101;  ///< lattice nodes per axis
};

/// One run, fully described. See README for the JSON schema.
struct RunConfig {
  std::uint64_t seed = 0;
  Domain domain = Domain::ball(2);
  OperatorSpec op = LinearOperator{};
  ScanSettings settings;
  OracleConfig oracle;
  ValidateConfig validate;
  ExportConfig exports;
  std::string output_dir;  ///< empty: taken from the command line
};

/// Parses a JSON config; empty text gives all defaults. Throws ConfigError
/// naming the offending key and constraint.
RunConfig parse_config(const std::string& text);

/// Fully resolved config as JSON text; parse_config(resolved_config_json(c))
/// reproduces c.
std::string resolved_config_json(const RunConfig& config);

}  // namespace pinneig
