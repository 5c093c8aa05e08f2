#include "pinneig/train.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "pinneig/errors.hpp"
#include "pinneig/rng.hpp"

namespace pinneig {
namespace {

constexpr std::uint64_t kTrainBatchLabel = 0x7472616eULL;
constexpr std::uint64_t kValidationBatchLabel = 0x76616c69ULL;
constexpr std::uint64_t kResampleLabel = 0x72657361ULL;

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (max_steps < 1) throw std::invalid_argument("max_steps must be at least 1");
  if (warm_max_steps < 1) throw std::invalid_argument("warm_max_steps must be at least 1");
  if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0)) throw std::invalid_argument("adam_beta1 must lie in (0, 1)");
  if (!(adam_beta2 > 0.0 && adam_beta2 < 1.0)) throw std::invalid_argument("adam_beta2 must lie in (0, 1)");
  if (!(adam_eps > 0.0)) throw std::invalid_argument("adam_eps must be positive");
  if (!(rel_improve_tol >= 0.0)) throw std::invalid_argument("rel_improve_tol must be non-negative");
  if (patience < 1) throw std::invalid_argument("patience must be at least 1");
  if (check_every < 1) throw std::invalid_argument("check_every must be at least 1");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw std::invalid_argument("lr_decay must lie in (0, 1]");
}

std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::converged: return "converged";
    case StopReason::max_steps: return "max_steps";
    case StopReason::diverged: return "diverged";
  }
  return "unknown";
}

StopReason stop_reason_from_string(const std::string& s) {
  if (s == "converged") return StopReason::converged;
  if (s == "max_steps") return StopReason::max_steps;
  if (s == "diverged") return StopReason::diverged;
  throw std::invalid_argument("unknown stop reason '" + s + "'");
}

MinimizeResult adam_minimize(Eigen::VectorXd theta, const Objective& objective, const TrainConfig& cfg) {
  cfg.validate();
  const Eigen::Index n = theta.size();
  Eigen::VectorXd m = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd grad(n);

  MinimizeResult result;
  result.theta = theta;
  result.best_loss = std::numeric_limits<double>::infinity();
  double lr = cfg.learning_rate;
  double beta1_pow = 1.0, beta2_pow = 1.0;
  double best_at_last_check = std::numeric_limits<double>::infinity();
  int stale_checks = 0;

  auto consider = [&](double loss) {
    if (loss < result.best_loss) {
      result.best_loss = loss;
      result.theta = theta;
    }
  };

  for (int step = 0; step < cfg.max_steps; ++step) {
    const double loss = objective(theta, step, grad);
    if (!std::isfinite(loss) || !grad.allFinite()) {
      result.stop_reason = StopReason::diverged;
      return result;
    }
    consider(loss);
    if (step % cfg.check_every == 0) result.loss_history.emplace_back(step, loss);

    beta1_pow *= cfg.adam_beta1;
    beta2_pow *= cfg.adam_beta2;
    m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * grad;
    v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * grad.cwiseAbs2();
    const double step_size = lr / (1.0 - beta1_pow);
    const double v_scale = 1.0 / std::sqrt(1.0 - beta2_pow);
    theta.array() -= step_size * m.array() / ((v.array().sqrt() * v_scale) + cfg.adam_eps);
    result.steps_run = step + 1;

    if (result.steps_run % cfg.check_every == 0) {
      lr *= cfg.lr_decay;
      const bool improved = std::isinf(best_at_last_check)
                                ? std::isfinite(result.best_loss)
                                : result.best_loss < best_at_last_check - cfg.rel_improve_tol * std::abs(best_at_last_check);
      stale_checks = improved ? 0 : stale_checks + 1;
      best_at_last_check = result.best_loss;
      if (stale_checks >= cfg.patience) {
        result.stop_reason = StopReason::converged;
        break;
      }
    }
  }

  // The last update has not been scored yet.
  const double last = objective(theta, result.steps_run, grad);
  if (std::isfinite(last)) {
    consider(last);
  } else if (result.stop_reason != StopReason::converged) {
    result.stop_reason = StopReason::diverged;
  }
  return result;
}

TrainingBatches make_training_batches(const Domain& domain, const LossConfig& cfg, std::uint64_t seed) {
  if (cfg.n_train < 1 || cfg.n_val < 1) throw std::invalid_argument("collocation counts must be at least 1");
  TrialBatch train = make_trial_batch(domain, sample_interior(domain, cfg.n_train, derive_seed(seed, kTrainBatchLabel)));
  if (!cfg.independent_validation) return {train, train};
  TrialBatch val = make_trial_batch(domain, sample_interior(domain, cfg.n_val, derive_seed(seed, kValidationBatchLabel)));
  return {std::move(train), std::move(val)};
}

std::pair<MlpParams, TrainReport> train_at_E(const MlpParams& init, double e, const OperatorSpec& op,
                                             const Domain& domain, const LossConfig& loss_cfg,
                                             const TrainConfig& train_cfg, const TrainingBatches& batches,
                                             std::uint64_t seed, int steps) {
  if (!init.flat().allFinite()) throw std::invalid_argument("initial parameters must be finite");
  TrainConfig cfg = train_cfg;
  if (steps > 0) cfg.max_steps = steps;
  const NetShape shape = init.shape();
  const double vol = volume(domain);
  const ResidualLoss fixed_loss(op, e, loss_cfg.mu0, vol, batches.train.batch.points);

  Objective objective = [&](const Eigen::VectorXd& theta, int step, Eigen::VectorXd& grad) {
    const MlpParams params(shape, theta);
    try {
      if (loss_cfg.resample_each_step) {
        const TrialBatch fresh = make_trial_batch(
            domain, sample_interior(domain, loss_cfg.n_train, derive_seed(seed, kResampleLabel + step)));
        const ResidualLoss loss(op, e, loss_cfg.mu0, vol, fresh.batch.points);
        auto lg = loss_gradient(params, fresh, std::cref(loss));
        grad = std::move(lg.gradient.flat());
        return lg.loss;
      }
      auto lg = loss_gradient(params, batches.train, std::cref(fixed_loss));
      grad = std::move(lg.gradient.flat());
      return lg.loss;
    } catch (const NumericalError&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  };

  MinimizeResult run = adam_minimize(init.flat(), objective, cfg);
  MlpParams trained(shape, std::move(run.theta));
  TrainReport report;
  report.steps_run = run.steps_run;
  report.stop_reason = run.stop_reason;
  report.loss_history = std::move(run.loss_history);
  try {
    report.final = assemble_loss(trained, batches.validation, op, e, loss_cfg, domain);
  } catch (const NumericalError&) {
    report.stop_reason = StopReason::diverged;
    const double inf = std::numeric_limits<double>::infinity();
    report.final = LossBreakdown{inf, inf, inf, inf, mu_schedule(loss_cfg.mu0, e)};
  }
  return {std::move(trained), std::move(report)};
}

std::pair<MlpParams, TrainReport> train_at_E(const MlpParams& init, double e, const OperatorSpec& op,
                                             const Domain& domain, const LossConfig& loss_cfg,
                                             const TrainConfig& train_cfg, std::uint64_t seed) {
  return train_at_E(init, e, op, domain, loss_cfg, train_cfg, make_training_batches(domain, loss_cfg, seed), seed);
}

}  // namespace pinneig
