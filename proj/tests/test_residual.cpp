#include "doctest.h"

#include <cmath>
#include <limits>
#include <numbers>

#include "derivative_checks.hpp"
#include "pinneig/errors.hpp"
#include "pinneig/residual.hpp"

using namespace pinneig;

namespace {

Jet2 make_jet(double value, Eigen::Vector2d g, Eigen::Matrix2d h) {
  Jet2 j(2);
  j.value = value;
  j.gradient = g;
  j.hessian = h;
  return j;
}

}  // namespace

TEST_CASE("operator invariants") {
  CHECK_NOTHROW(validate(LinearOperator{}));
  CHECK_THROWS_WITH_AS(validate(PLaplaceOperator{0.5}), "p must exceed 1", std::invalid_argument);
  CHECK_THROWS_AS(validate(LinearOperator{HarmonicPotential{0.0}}), std::invalid_argument);
  CHECK(norm_exponent(LinearOperator{}) == 2.0);
  CHECK(norm_exponent(PLaplaceOperator{2.2}) == 2.2);
}

TEST_CASE("pointwise residuals") {
  // u = sin(pi x) sin(pi y) at the square's centre: -Laplace u = 2 pi^2 u.
  const double pi2 = std::numbers::pi * std::numbers::pi;
  const Jet2 centre = make_jet(1.0, {0.0, 0.0}, Eigen::Matrix2d{{-pi2, 0.0}, {0.0, -pi2}});
  CHECK(residual_linear(centre, 0.0, 2.0 * pi2) == doctest::Approx(0.0).scale(1.0));
  CHECK(residual_linear(centre, 0.0, pi2) == doctest::Approx(-pi2));
  CHECK(residual_linear(centre, 3.0, 2.0 * pi2) == doctest::Approx(-3.0));

  double x[] = {1.0, 2.0};
  CHECK(potential_eval(HarmonicPotential{2.0}, x) == doctest::Approx(10.0));
  CHECK(potential_eval(ZeroPotential{}, x) == 0.0);

  CHECK(p_laplacian(centre, 2.0, 1e-8) == -2.0 * pi2);
  CHECK(residual_p(centre, 2.0, 2.0 * pi2, 1e-8) == doctest::Approx(0.0).scale(1.0));
  const Jet2 bad = make_jet(1.0, {std::numeric_limits<double>::infinity(), 0.0}, Eigen::Matrix2d::Identity());
  CHECK_THROWS_AS(p_laplacian(bad, 2.5, 1e-8), NumericalError);
}

TEST_CASE("expanded p-Laplacian matches the divergence form") {
  for (double p : {1.5, 2.05, 2.2, 3.0, 4.5}) {
    for (const auto& x : {Eigen::VectorXd(Eigen::Vector2d(0.3, 0.4)), Eigen::VectorXd(Eigen::Vector2d(-0.7, 0.2)),
                          Eigen::VectorXd(Eigen::Vector3d(0.2, -0.5, 0.6))}) {
      CAPTURE(p);
      CHECK(checks::plaplace_fd_error(p, x) < 1e-4);
    }
  }
}

TEST_CASE("penalty schedule") {
  CHECK(mu_schedule(100.0, 0.5) == 100.0);
  CHECK(mu_schedule(100.0, -2.0) == 400.0);
  CHECK(mu_schedule(100.0, 10.0) == 10000.0);
}

TEST_CASE("loss of a known field") {
  // u = 1 on every point: residual E, norm estimate vol * 1.
  const Eigen::MatrixXd pts = Eigen::MatrixXd::Zero(2, 4);
  ResidualLoss loss(LinearOperator{}, 3.0, 100.0, 2.0, pts);
  JetBatch u(2, 4);
  u.value.setOnes();
  const auto b = loss.breakdown(u);
  CHECK(b.residual_term == doctest::Approx(2.0 * 9.0));
  CHECK(b.norm_estimate == doctest::Approx(2.0));
  CHECK(b.mu_used == 900.0);
  CHECK(b.penalty_term == doctest::Approx(900.0));
  CHECK(b.total == b.residual_term + b.penalty_term);
  CHECK(loss(u, nullptr) == b.total);
}

TEST_CASE("loss adjoints match differences") {
  const auto disk = Domain::ball(2);
  const auto trial = make_trial_batch(disk, sample_interior(disk, 32, 5));
  const auto params = init_params(NetShape{2, 16, 16}, 3);
  SplitMix64 rng(17);
  const OperatorSpec ops[] = {LinearOperator{}, LinearOperator{HarmonicPotential{1.5}}, PLaplaceOperator{2.2},
                              PLaplaceOperator{3.0}, PLaplaceOperator{2.0}};
  for (const auto& op : ops) {
    const ResidualLoss loss(op, 6.0, 100.0, volume(disk), trial.batch.points);
    const JetLossFn fn = [&](const JetBatch& u, JetBatch* adj) { return loss(u, adj); };
    const auto lg = loss_gradient(params, trial, fn);
    auto value = [&](const MlpParams& q) { return loss(trial_jets(q, trial), nullptr); };
    for (int dir = 0; dir < 20; ++dir) CHECK(checks::directional_error(params, lg.gradient, value, rng.next()) < 1e-5);
  }
}

TEST_CASE("p = 2 reproduces the linear path bit for bit") {
  const auto domain = Domain::ball(2);
  const auto batch = sample_interior(domain, 256, 9);
  const LossConfig cfg;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto params = init_params(NetShape{2, 32, 32}, seed);
    for (double e : {3.0, 5.78, 30.5}) {
      const auto lin = assemble_loss(params, batch, LinearOperator{}, e, cfg, domain);
      const auto pl = assemble_loss(params, batch, PLaplaceOperator{2.0}, e, cfg, domain);
      CHECK(lin == pl);
    }
  }
}

TEST_CASE("assembled loss equals the training loss") {
  const auto domain = Domain::unit_square();
  const auto trial = make_trial_batch(domain, sample_interior(domain, 128, 1));
  const auto params = init_params(NetShape{2, 32, 32}, 2);
  const LossConfig cfg;
  const auto b = assemble_loss(params, trial, LinearOperator{}, 20.0, cfg, domain);
  const ResidualLoss loss(LinearOperator{}, 20.0, cfg.mu0, volume(domain), trial.batch.points);
  const JetLossFn fn = [&](const JetBatch& u, JetBatch* adj) { return loss(u, adj); };
  CHECK(loss_gradient(params, trial, fn).loss == b.total);
  CHECK(b.total > 0.0);
}
