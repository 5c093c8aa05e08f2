#include "doctest.h"

#include <cmath>
#include <limits>

#include "pinneig/train.hpp"

using namespace pinneig;

namespace {

// f(x) = sum_i c_i (x_i - t_i)^2
Objective quadratic(const Eigen::VectorXd& c, const Eigen::VectorXd& t) {
  return [c, t](const Eigen::VectorXd& x, int, Eigen::VectorXd& g) {
    const Eigen::VectorXd d = x - t;
    g = 2.0 * c.cwiseProduct(d);
    return c.dot(d.cwiseAbs2());
  };
}

}  // namespace

TEST_CASE("config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.lr_decay = 1.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  for (auto r : {StopReason::converged, StopReason::max_steps, StopReason::diverged}) {
    CHECK(stop_reason_from_string(to_string(r)) == r);
  }
  CHECK_THROWS_AS(stop_reason_from_string("bogus"), std::invalid_argument);
}

TEST_CASE("Adam solves a quadratic") {
  const Eigen::VectorXd c = Eigen::Vector3d(1.0, 4.0, 0.25);
  const Eigen::VectorXd t = Eigen::Vector3d(1.0, -2.0, 0.5);
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.max_steps = 20000;
  cfg.lr_decay = 0.95;
  cfg.rel_improve_tol = 0.0;
  const auto r = adam_minimize(Eigen::VectorXd::Zero(3), quadratic(c, t), cfg);
  CHECK((r.theta - t).norm() < 1e-4);
  CHECK(r.best_loss < 1e-8);
  CHECK(r.stop_reason == StopReason::converged);
  CHECK(r.loss_history.front().first == 0);
}

TEST_CASE("Adam reaches the minimiser of a bowl") {
  const Eigen::VectorXd target = Eigen::Vector4d(0.5, -1.0, 0.25, 2.0);
  TrainConfig cfg;
  cfg.max_steps = 5000;
  cfg.learning_rate = 1e-2;
  cfg.lr_decay = 0.98;
  cfg.rel_improve_tol = 0.0;
  const auto r = adam_minimize(Eigen::VectorXd::Zero(4), quadratic(Eigen::Vector4d::Ones(), target), cfg);
  CHECK(r.steps_run <= 5000);
  CHECK((r.theta - target).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("one step means one update") {
  TrainConfig cfg;
  cfg.max_steps = 1;
  const auto r = adam_minimize(Eigen::Vector2d(1.0, 1.0), quadratic(Eigen::Vector2d::Ones(), Eigen::Vector2d::Zero()), cfg);
  CHECK(r.steps_run == 1);
  // Adam's first step moves every coordinate by the learning rate.
  CHECK(r.theta[0] == doctest::Approx(1.0 - cfg.learning_rate));
}

TEST_CASE("early stopping and budgets") {
  const Eigen::VectorXd c = Eigen::Vector2d(1.0, 1.0);
  TrainConfig cfg;
  cfg.max_steps = 120;
  const auto capped = adam_minimize(Eigen::Vector2d(5.0, 5.0), quadratic(c, Eigen::Vector2d::Zero()), cfg);
  CHECK(capped.stop_reason == StopReason::max_steps);
  CHECK(capped.steps_run == 120);

  // A flat objective never improves: stops after `patience` checks.
  Objective flat = [](const Eigen::VectorXd& x, int, Eigen::VectorXd& g) {
    g = Eigen::VectorXd::Zero(x.size());
    return 1.0;
  };
  cfg.max_steps = 3000;
  const auto r = adam_minimize(Eigen::Vector2d(1.0, 1.0), flat, cfg);
  CHECK(r.stop_reason == StopReason::converged);
  CHECK(r.steps_run == cfg.check_every * (cfg.patience + 1));
}

TEST_CASE("divergence keeps the best iterate") {
  Objective blowup = [](const Eigen::VectorXd& x, int step, Eigen::VectorXd& g) {
    g = Eigen::VectorXd::Ones(x.size());
    return step < 10 ? 10.0 - step : std::numeric_limits<double>::quiet_NaN();
  };
  const auto r = adam_minimize(Eigen::Vector2d(0.0, 0.0), blowup, TrainConfig{});
  CHECK(r.stop_reason == StopReason::diverged);
  CHECK(r.best_loss == 1.0);
  CHECK(r.steps_run == 10);
}

TEST_CASE("training at fixed E lowers the loss and is deterministic") {
  const auto disk = Domain::ball(2);
  LossConfig loss;
  loss.n_train = 256;
  TrainConfig cfg;
  cfg.max_steps = 300;
  const auto init = init_params(NetShape{2, 16, 16}, 4);
  const auto batches = make_training_batches(disk, loss, 7);
  const auto before = assemble_loss(init, batches.validation, LinearOperator{}, 5.8, loss, disk);
  const auto [p1, r1] = train_at_E(init, 5.8, LinearOperator{}, disk, loss, cfg, 7);
  const auto [p2, r2] = train_at_E(init, 5.8, LinearOperator{}, disk, loss, cfg, 7);
  CHECK(r1 == r2);
  CHECK(p1 == p2);
  CHECK(r1.final.total < 0.1 * before.total);
  CHECK(r1.final == assemble_loss(p1, batches.validation, LinearOperator{}, 5.8, loss, disk));

  const auto [p3, r3] = train_at_E(init, 5.8, LinearOperator{}, disk, loss, cfg, batches, 7, 50);
  CHECK(r3.steps_run == 50);
}

TEST_CASE("training batches") {
  const auto disk = Domain::ball(2);
  LossConfig loss;
  loss.n_train = 64;
  loss.n_val = 32;
  const auto shared = make_training_batches(disk, loss, 1);
  CHECK(shared.validation.batch.points == shared.train.batch.points);
  loss.independent_validation = true;
  const auto split = make_training_batches(disk, loss, 1);
  CHECK(split.validation.size() == 32);
  CHECK(split.train.size() == 64);
}

TEST_CASE("the disk loss dips at the first eigenvalue") {
  const auto disk = Domain::ball(2);
  const LossConfig loss;
  const TrainConfig cfg;
  const double e1 = 5.783185962946784;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto init = init_params(NetShape{2, 32, 32}, seed);
    const auto at = train_at_E(init, e1, LinearOperator{}, disk, loss, cfg, seed).second;
    const auto off = train_at_E(init, e1 + 2.0, LinearOperator{}, disk, loss, cfg, seed).second;
    CAPTURE(seed);
    CHECK(at.final.total < off.final.total);
  }
}
