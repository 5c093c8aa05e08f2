#include "doctest.h"

#include <cmath>
#include <numbers>

#include "pinneig/errors.hpp"
#include "pinneig/geometry.hpp"
#include "pinneig/rng.hpp"

using namespace pinneig;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

// Central differences of the boundary factor at x.
void check_factor_derivatives(const Domain& domain, const Eigen::VectorXd& x) {
  const Jet2 j = boundary_factor(domain, x);
  const double h = 1e-5;
  for (int i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    const Jet2 jp = boundary_factor(domain, xp), jm = boundary_factor(domain, xm);
    CHECK(j.gradient[i] == doctest::Approx((jp.value - jm.value) / (2 * h)).epsilon(1e-7));
    for (int k = 0; k < x.size(); ++k) {
      CHECK(j.hessian(k, i) == doctest::Approx((jp.gradient[k] - jm.gradient[k]) / (2 * h)).epsilon(1e-6));
    }
  }
}

}  // namespace

TEST_CASE("counter-based generator") {
  SplitMix64 a(42), b(42);
  for (int k = 0; k < 100; ++k) CHECK(a.next() == b.next());
  SplitMix64 u(7);
  double sum = 0.0;
  for (int k = 0; k < 100000; ++k) {
    const double x = u.uniform();
    REQUIRE(x >= 0.0);
    REQUIRE(x < 1.0);
    sum += x;
  }
  CHECK(sum / 100000 == doctest::Approx(0.5).epsilon(0.01));
  CHECK(derive_seed(1, 2) != derive_seed(1, 3));
  CHECK(derive_seed(1, 2) == derive_seed(1, 2));
}

TEST_CASE("named constructors enforce invariants") {
  CHECK_THROWS_AS(Domain::ball(2, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(Domain::ball(0), std::invalid_argument);
  CHECK_THROWS_AS(Domain::rectangle({{1.0, 1.0}}), std::invalid_argument);
  CHECK_THROWS_AS(Domain::rectangle({}), std::invalid_argument);
  CHECK_THROWS_AS(Domain::annulus(1.0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(Domain::triangle({0, 0}, {1, 1}, {2, 2}), std::invalid_argument);
  CHECK(Domain::ball(3).dim() == 3);
  CHECK(Domain::unit_square().kind_name() == "rectangle");
}

TEST_CASE("membership is strict") {
  const auto disk = Domain::ball(2);
  CHECK(contains(disk, vec({0.0, 0.0})));
  CHECK(contains(disk, vec({0.6, 0.79})));
  CHECK_FALSE(contains(disk, vec({1.0, 0.0})));
  CHECK_FALSE(contains(disk, vec({0.8, 0.8})));
  CHECK_THROWS_AS(contains(disk, vec({0.0, 0.0, 0.0})), std::invalid_argument);

  const auto sq = Domain::unit_square();
  CHECK(contains(sq, vec({0.5, 0.5})));
  CHECK_FALSE(contains(sq, vec({0.0, 0.5})));
  CHECK_FALSE(contains(sq, vec({1.0, 1.0})));

  const auto ring = Domain::annulus(0.5, 1.0);
  CHECK_FALSE(contains(ring, vec({0.0, 0.0})));
  CHECK(contains(ring, vec({0.75, 0.0})));

  const auto tri = Domain::triangle({0, 0}, {1, 0}, {0, 1});
  CHECK(contains(tri, vec({0.2, 0.2})));
  CHECK_FALSE(contains(tri, vec({0.6, 0.6})));
}

TEST_CASE("interior sampling") {
  const auto disk = Domain::ball(2);
  const auto batch = sample_interior(disk, 20000, 11);
  REQUIRE(batch.size() == 20000);
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  double r2 = 0.0;
  for (Eigen::Index p = 0; p < batch.size(); ++p) {
    const Eigen::VectorXd x = batch.points.col(p);
    REQUIRE(contains(disk, x));
    mean += batch.points.col(p);
    r2 += x.squaredNorm();
  }
  mean /= 20000.0;
  CHECK(std::abs(mean[0]) < 0.02);
  CHECK(std::abs(mean[1]) < 0.02);
  // E|x|^2 = 1/2 on the unit disk.
  CHECK(r2 / 20000.0 == doctest::Approx(0.5).epsilon(0.02));
  // Acceptance ratio approaches pi/4.
  CHECK(20000.0 / static_cast<double>(batch.proposals) == doctest::Approx(std::numbers::pi / 4).epsilon(0.03));

  const auto again = sample_interior(disk, 20000, 11);
  CHECK(again.points == batch.points);
  CHECK(sample_interior(disk, 100, 12).points != sample_interior(disk, 100, 11).points);

  const auto thin = Domain::annulus(0.99999999, 1.0);
  CHECK_THROWS_AS(sample_interior(thin, 10, 1), DegenerateDomainError);
}

TEST_CASE("volumes") {
  CHECK(volume(Domain::ball(2)) == doctest::Approx(std::numbers::pi));
  CHECK(volume(Domain::ball(3)) == doctest::Approx(4.0 * std::numbers::pi / 3.0));
  CHECK(volume(Domain::ball(4, 2.0)) == doctest::Approx(std::numbers::pi * std::numbers::pi / 2.0 * 16.0));
  CHECK(volume(Domain::rectangle({{0, 2}, {1, 4}})) == doctest::Approx(6.0));
  CHECK(volume(Domain::annulus(0.5, 1.0)) == doctest::Approx(0.75 * std::numbers::pi));
  CHECK(volume(Domain::triangle({0, 0}, {1, 0}, {0, 1})) == doctest::Approx(0.5));
}

TEST_CASE("boundary factor vanishes on the boundary and is positive inside") {
  const Domain domains[] = {Domain::ball(2), Domain::ball(3, 2.0), Domain::unit_square(),
                            Domain::rectangle({{-1, 2}, {0, 1}, {0, 3}}), Domain::annulus(0.4, 1.0),
                            Domain::triangle({0, 0}, {2, 0}, {0.5, 1.5})};
  for (const auto& d : domains) {
    CAPTURE(d.kind_name());
    const auto edge = sample_boundary(d, 200, 3);
    for (Eigen::Index p = 0; p < edge.cols(); ++p) {
      const Eigen::VectorXd x = edge.col(p);
      CHECK(std::abs(boundary_factor(d, x).value) < 1e-12);
    }
    const auto inner = sample_interior(d, 200, 4);
    for (Eigen::Index p = 0; p < inner.size(); ++p) {
      const Eigen::VectorXd x = inner.points.col(p);
      CHECK(boundary_factor(d, x).value > 0.0);
    }
    check_factor_derivatives(d, inner.points.col(0));
    check_factor_derivatives(d, inner.points.col(1));

    const JetBatch batch = boundary_factor(d, inner.points);
    const Jet2 single = boundary_factor(d, Eigen::VectorXd(inner.points.col(5)));
    CHECK(batch.value[5] == single.value);
    CHECK(batch.laplacian(5) == doctest::Approx(single.laplacian()));
  }
}

TEST_CASE("boundary factor normalisation") {
  CHECK(boundary_factor(Domain::unit_square(), vec({0.5, 0.5})).value == doctest::Approx(1.0));
  const auto tri = Domain::triangle({0, 0}, {1, 0}, {0, 1});
  CHECK(boundary_factor(tri, vec({1.0 / 3, 1.0 / 3})).value == doctest::Approx(1.0));
  CHECK(boundary_factor(Domain::ball(2), vec({0.0, 0.0})).value == doctest::Approx(1.0));
}
