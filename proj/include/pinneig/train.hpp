#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "pinneig/netcalc.hpp"
#include "pinneig/residual.hpp"

namespace pinneig {

struct TrainConfig {
  double learning_rate = 1e-3;
  int max_steps = 3000;       ///< budget for a cold (freshly initialised) start
  int warm_max_steps = 800;   ///< budget when starting from a neighbour's parameters
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double rel_improve_tol = 1e-4;
  int patience = 5;
  int check_every = 50;
  /// Learning rate is multiplied by this factor at every check.
  double lr_decay = 1.0;

  /// Throws std::invalid_argument on out-of-range values.
  void validate() const;
};

enum class StopReason { converged, max_steps, diverged };

std::string to_string(StopReason r);
StopReason stop_reason_from_string(const std::string& s);

struct TrainReport {
  LossBreakdown final;
  int steps_run = 0;
  StopReason stop_reason = StopReason::max_steps;
  /// (step, training loss) every check_every steps.
  std::vector<std::pair<int, double>> loss_history;

  bool operator==(const TrainReport&) const = default;
};

// Objective for the generic minimiser: returns the loss at theta for the
// given step and writes its gradient. A non-finite return marks divergence.
using Objective = std::function<double(const Eigen::VectorXd& theta, int step, Eigen::VectorXd& grad)>;

struct MinimizeResult {
  Eigen::VectorXd theta;  ///< best iterate seen
  double best_loss = 0.0;
  int steps_run = 0;
  StopReason stop_reason = StopReason::max_steps;
  std::vector<std::pair<int, double>> loss_history;
};

/// Adam with relative-improvement early stopping. On a non-finite loss the
/// run stops with `diverged` and returns the best finite iterate.
MinimizeResult adam_minimize(Eigen::VectorXd theta, const Objective& objective, const TrainConfig& cfg);

/// Training and reporting batches for one E-point, with cached boundary factors.
struct TrainingBatches {
  TrialBatch train;
  TrialBatch validation;
};

TrainingBatches make_training_batches(const Domain& domain, const LossConfig& cfg, std::uint64_t seed);

/// Minimises the penalised loss at fixed E starting from `init`.
/// `steps` overrides cfg.max_steps when positive.
std::pair<MlpParams, TrainReport> train_at_E(const MlpParams& init, double e, const OperatorSpec& op,
                                             const Domain& domain, const LossConfig& loss_cfg,
                                             const TrainConfig& train_cfg, const TrainingBatches& batches,
                                             std::uint64_t seed, int steps = 0);

std::pair<MlpParams, TrainReport> train_at_E(const MlpParams& init, double e, const OperatorSpec& op,
                                             const Domain& domain, const LossConfig& loss_cfg,
                                             const TrainConfig& train_cfg, std::uint64_t seed);

}  // namespace pinneig
