#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pinneig/netcalc.hpp"
#include "pinneig/residual.hpp"
#include "pinneig/train.hpp"

namespace pinneig {

struct ScanConfig {
  double e_lo = 3.0;
  double e_hi = 35.0;
  int grid_count = 129;
  double threshold = 0.5;
  int refine_depth = 2;
  int refine_factor = 4;
  bool warm_start = true;
  /// After the left-to-right sweep, sweep back right-to-left and keep, per
  /// point, whichever of the two trained networks has the lower loss.
  bool backward_sweep = true;
  /// Concurrent refinements of distinct candidates.
  int workers = 1;

  void validate() const;
};

/// Everything a sweep needs besides the operator and domain.
struct ScanSettings {
  NetShape net;
  LossConfig loss;
  TrainConfig train;
  ScanConfig scan;
};

struct CurveEntry {
  double e = 0.0;
  LossBreakdown breakdown;
  int steps_run = 0;
  StopReason stop_reason = StopReason::max_steps;
  std::string params_ref;  ///< snapshot id
  MlpParams params;
  bool from_backward = false;  ///< kept from the right-to-left sweep
};

struct LossCurve {
  std::vector<CurveEntry> entries;
  std::uint64_t seed = 0;

  std::size_t size() const { return entries.size(); }
  /// Total loss with diverged entries mapped to +inf.
  double score(std::size_t i) const;
};

struct EigenEstimate {
  double e_hat = 0.0;
  double loss_at_min = 0.0;
  double grid_resolution = 0.0;  ///< spacing of the finest grid used
  int refinement_level = 0;
  bool bracketed = true;  ///< false when the minimum sat on a bracket end after widening
  std::string params_ref;
  MlpParams params;
};

/// j equally spaced values from lo to hi, both included.
std::vector<double> make_grid(double e_lo, double e_hi, int count);

/// Called with the grid index whenever an entry is set or replaced.
using CurveObserver = std::function<void(std::size_t index, const CurveEntry&)>;

/// Left-to-right sweep, warm-starting each point from its left neighbour
/// unless disabled or the neighbour diverged. With `backward_sweep`, a second
/// pass runs right-to-left from the right neighbour's kept network and
/// replaces an entry when it reaches a lower loss.
LossCurve run_scan(const std::vector<double>& grid, const OperatorSpec& op, const Domain& domain,
                   const ScanSettings& settings, std::uint64_t seed, const CurveObserver& observer = {});

/// Interior strict local minima (leftmost of a plateau) with total < threshold.
std::vector<std::size_t> detect_minima(const LossCurve& curve, double threshold);

/// Local grid refinement around candidate i0, starting every refined point
/// from the current best snapshot.
EigenEstimate refine(const LossCurve& curve, std::size_t i0, const OperatorSpec& op, const Domain& domain,
                     const ScanSettings& settings, std::uint64_t seed);

/// Refines every candidate (up to `workers` at once) and keeps estimates
/// whose minimum stays below the threshold. Output is in E order.
std::vector<EigenEstimate> refine_all(const LossCurve& curve, const std::vector<std::size_t>& candidates,
                                      const OperatorSpec& op, const Domain& domain, const ScanSettings& settings,
                                      std::uint64_t seed);

}  // namespace pinneig
