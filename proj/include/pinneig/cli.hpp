#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "pinneig/config.hpp"
#include "pinneig/oracle.hpp"
#include "pinneig/scan.hpp"

namespace pinneig {

namespace fs = std::filesystem;

// Artifact file names inside an output directory.
inline constexpr const char* kResolvedConfig = "resolved_config.json";
inline constexpr const char* kLossCurve = "loss_curve.csv";
inline constexpr const char* kCurveIndex = "curve_index.json";
inline constexpr const char* kEigenvalues = "eigenvalues.json";
inline constexpr const char* kOracleSpectrum = "oracle_spectrum.json";
inline constexpr const char* kUpperBound = "upper_bound.csv";
inline constexpr const char* kSnapshotDir = "snapshots";
inline constexpr const char* kFailedMarker = "FAILED";

/// 17 significant digits.
std::string format_double(double x);

std::string loss_curve_csv(const LossCurve& curve);

/// Rebuilds a curve (with parameters) from loss_curve.csv and curve_index.json.
LossCurve read_curve(const fs::path& dir);

struct StoredEstimate {
  double e_hat = 0.0;
  double loss_at_min = 0.0;
  double grid_resolution = 0.0;
  int refinement_level = 0;
  bool bracketed = true;
  std::string snapshot;  ///< relative to the output directory
};

std::vector<StoredEstimate> read_estimates(const fs::path& dir);
OracleSpectrum read_oracle(const fs::path& dir);

/// Reference spectrum for the configured problem. Throws std::runtime_error
/// ("no oracle for p ≠ 2", unsupported geometry) when none exists.
OracleSpectrum oracle_for(const RunConfig& config);

struct EigenfunctionGrid {
  std::vector<int> shape;               ///< nodes per axis
  Eigen::MatrixXd nodes;                ///< d x n lattice coordinates
  std::vector<double> values;           ///< u at each node, 0 outside the domain
  bool sign_flipped = false;
  double l2_norm = 0.0;
};

/// Trial function on the export lattice with the max-|u| node made positive.
EigenfunctionGrid evaluate_eigenfunction(const MlpParams& params, const Domain& domain, int resolution);
std::string eigenfunction_csv(const EigenfunctionGrid& grid);

struct ValidationRow {
  double oracle = 0.0;
  double estimate = 0.0;  ///< NaN when missed
  double tolerance = 0.0;
  bool pass = false;
  std::string note;
};

/// Matches estimates to reference values inside (e_lo, e_hi).
std::vector<ValidationRow> compare_to_oracle(const std::vector<StoredEstimate>& estimates, const OracleSpectrum& oracle,
                                             double e_lo, double e_hi, double extra_tolerance);

// Subcommands. Each returns a process exit status; on failure the error goes
// to `err` and a FAILED marker is left in the output directory.
int cmd_scan(const RunConfig& config, const fs::path& out, std::ostream& log, std::ostream& err);
int cmd_refine(const RunConfig& config, const fs::path& out, std::ostream& log, std::ostream& err);
int cmd_oracle(const RunConfig& config, const fs::path& out, std::ostream& log, std::ostream& err);
int cmd_export_eigenfunction(const RunConfig& config, const fs::path& out, std::ostream& log, std::ostream& err);
int cmd_validate(const RunConfig& config, const fs::path& out, std::ostream& log, std::ostream& err);

}  // namespace pinneig
