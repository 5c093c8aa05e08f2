#include "doctest.h"

#include <cmath>
#include <limits>

#include "derivative_checks.hpp"
#include "pinneig/errors.hpp"
#include "pinneig/geometry.hpp"
#include "pinneig/netcalc.hpp"

using namespace pinneig;

namespace {

Eigen::VectorXd random_point(SplitMix64& rng, int d) {
  Eigen::VectorXd x(d);
  for (int i = 0; i < d; ++i) x[i] = rng.uniform(-1.0, 1.0);
  return x;
}

}  // namespace

TEST_CASE("parameter layout") {
  const NetShape shape{2, 32, 32};
  CHECK(shape.parameter_count() == 2 * 32 + 32 + 32 * 32 + 32 + 32 + 1);
  const auto p = init_params(shape, 5);
  CHECK(p.b1().isZero());
  CHECK(p.b2().isZero());
  CHECK(p.b3() == 0.0);
  CHECK(p.w1().cwiseAbs().maxCoeff() <= glorot_bound(2, 32));
  CHECK(p.w2().cwiseAbs().maxCoeff() <= glorot_bound(32, 32));
  CHECK(p == init_params(shape, 5));
  CHECK_FALSE(p == init_params(shape, 6));
  const int widths[] = {3, 8, 4, 1};
  CHECK(shape_from_widths(widths).parameter_count() == 3 * 8 + 8 + 8 * 4 + 4 + 4 + 1);
}

TEST_CASE("jets match central differences") {
  SplitMix64 rng(99);
  for (int d : {1, 2, 3, 4}) {
    for (int trial = 0; trial < 5; ++trial) {
      const auto params = init_params(NetShape{d, 16, 12}, rng.next());
      const Eigen::VectorXd x = random_point(rng, d);
      CHECK(checks::jet_fd_error(params, x) < 1e-5);
      const Jet2 j = forward_jet(params, x);
      CHECK((j.hessian - j.hessian.transpose()).norm() <= 1e-14 * (1.0 + j.hessian.norm()));
    }
  }
}

TEST_CASE("batch and single-point jets agree") {
  const auto params = init_params(NetShape{3, 32, 32}, 1);
  SplitMix64 rng(3);
  Eigen::MatrixXd pts(3, 7);
  for (Eigen::Index p = 0; p < 7; ++p) pts.col(p) = random_point(rng, 3);
  const JetBatch b = forward_jets(params, pts);
  for (Eigen::Index p = 0; p < 7; ++p) {
    const Jet2 j = forward_jet(params, pts.col(p));
    CHECK(b.value[p] == doctest::Approx(j.value).epsilon(1e-14));
    CHECK((b.jet(p).hessian - j.hessian).norm() < 1e-13);
  }
}

TEST_CASE("trial jets follow the product rule") {
  const auto disk = Domain::ball(2);
  const auto params = init_params(NetShape{2, 32, 32}, 8);
  const auto batch = sample_interior(disk, 5, 1);
  for (Eigen::Index p = 0; p < 5; ++p) {
    const Eigen::VectorXd x = batch.points.col(p);
    const Jet2 u = trial_jet(params, disk, x);
    const double h = 1e-5;
    for (int i = 0; i < 2; ++i) {
      Eigen::VectorXd xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      const Jet2 up = trial_jet(params, disk, xp), um = trial_jet(params, disk, xm);
      CHECK(u.gradient[i] == doctest::Approx((up.value - um.value) / (2 * h)).epsilon(1e-6));
      for (int k = 0; k < 2; ++k) {
        CHECK(u.hessian(k, i) == doctest::Approx((up.gradient[k] - um.gradient[k]) / (2 * h)).epsilon(1e-5));
      }
    }
  }
  const JetBatch all = trial_jets(params, make_trial_batch(disk, batch));
  CHECK(all.value[2] == doctest::Approx(trial_jet(params, disk, batch.points.col(2)).value).epsilon(1e-14));

  // Trial functions vanish on the boundary.
  const auto edge = sample_boundary(disk, 50, 2);
  for (Eigen::Index p = 0; p < edge.cols(); ++p) {
    CHECK(std::abs(trial_jet(params, disk, Eigen::VectorXd(edge.col(p))).value) < 1e-12);
  }
}

TEST_CASE("parameter gradients match directional differences") {
  SplitMix64 rng(2024);
  for (int d : {2, 3}) {
    const auto params = init_params(NetShape{d, 32, 32}, rng.next());
    Eigen::MatrixXd pts(d, 16);
    for (Eigen::Index p = 0; p < pts.cols(); ++p) pts.col(p) = random_point(rng, d);
    const auto lg = loss_gradient(params, pts, checks::probe_loss);
    auto loss = [&](const MlpParams& q) { return checks::probe_loss(forward_jets(q, pts), nullptr); };
    CHECK(lg.loss == doctest::Approx(loss(params)).epsilon(1e-14));
    for (int dir = 0; dir < 20; ++dir) CHECK(checks::directional_error(params, lg.gradient, loss, rng.next()) < 1e-5);

    const auto domain = Domain::ball(d);
    const auto trial = make_trial_batch(domain, sample_interior(domain, 16, rng.next()));
    const auto tg = loss_gradient(params, trial, checks::probe_loss);
    auto trial_loss = [&](const MlpParams& q) { return checks::probe_loss(trial_jets(q, trial), nullptr); };
    for (int dir = 0; dir < 20; ++dir) {
      CHECK(checks::directional_error(params, tg.gradient, trial_loss, rng.next()) < 1e-5);
    }
  }
}

TEST_CASE("non-finite loss names the point") {
  const auto params = init_params(NetShape{2, 4, 4}, 1);
  Eigen::MatrixXd pts = Eigen::MatrixXd::Zero(2, 3);
  JetLossFn bad = [](const JetBatch& u, JetBatch* adjoint) {
    if (adjoint) *adjoint = JetBatch(u.dim(), u.size());
    return std::numeric_limits<double>::quiet_NaN();
  };
  CHECK_THROWS_AS(loss_gradient(params, pts, bad), NumericalError);
}
