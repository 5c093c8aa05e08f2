#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "pinneig/jet.hpp"

namespace pinneig {

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  double length() const { return hi - lo; }
};

struct Ball {
  int dim = 2;
  double radius = 1.0;
};

struct Rectangle {
  std::vector<Interval> sides;
};

/// Planar annulus centred at the origin.
struct Annulus {
  double inner = 0.5;
  double outer = 1.0;
};

struct Triangle {
  Eigen::Vector2d a, b, c;
};

/// Computational domain with homogeneous Dirichlet boundary.
///
/// Instances are created through the named constructors, which enforce the
/// shape invariants (positive radii, nonempty sides, non-collinear vertices).
class Domain {
 public:
  using Shape = std::variant<Ball, Rectangle, Annulus, Triangle>;

  static Domain ball(int dim, double radius = 1.0);
  static Domain rectangle(std::vector<Interval> sides);
  static Domain unit_square() { return rectangle({{0.0, 1.0}, {0.0, 1.0}}); }
  static Domain annulus(double inner, double outer);
  static Domain triangle(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                         const Eigen::Vector2d& c);

  int dim() const { return dim_; }
  const Shape& shape() const { return shape_; }
  const std::vector<Interval>& bounding_box() const { return box_; }
  std::string kind_name() const;

 private:
  Domain(Shape shape, int dim, std::vector<Interval> box)
      : shape_(std::move(shape)), dim_(dim), box_(std::move(box)) {}

  Shape shape_;
  int dim_;
  std::vector<Interval> box_;
};

/// Uniform interior collocation points, one column per point.
struct PointBatch {
  Eigen::MatrixXd points;
  std::uint64_t seed = 0;
  /// Number of bounding-box proposals drawn to obtain the batch.
  std::uint64_t proposals = 0;

  Eigen::Index size() const { return points.cols(); }
  int dim() const { return static_cast<int>(points.rows()); }
};

/// True iff x lies strictly inside the domain. Throws std::invalid_argument on
/// a dimension mismatch.
bool contains(const Domain& domain, std::span<const double> x);
inline bool contains(const Domain& domain, const Eigen::VectorXd& x) {
  return contains(domain, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
}

/// Rejection sampling from the bounding box with the counter-based SplitMix64
/// stream `seed`. Throws DegenerateDomainError if fewer than one proposal in a
/// thousand lands inside.
PointBatch sample_interior(const Domain& domain, Eigen::Index n, std::uint64_t seed);

/// Polynomial boundary factor B with exact gradient and Hessian.
///
///   ball:      R^2 - |x|^2
///   rectangle: prod_i 4 (x_i - a_i)(b_i - x_i) / (b_i - a_i)^2
///   annulus:   (|x|^2 - r0^2)(r1^2 - |x|^2)
///   triangle:  27 l1 l2 l3 with l_k the barycentric coordinates
///
/// B > 0 inside, B = 0 on the boundary.
Jet2 boundary_factor(const Domain& domain, std::span<const double> x);
inline Jet2 boundary_factor(const Domain& domain, const Eigen::VectorXd& x) {
  return boundary_factor(domain,
                         std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
}

/// Boundary factor jets for every point of a batch.
JetBatch boundary_factor(const Domain& domain, const Eigen::MatrixXd& points);

double volume(const Domain& domain);

/// Points on the boundary, drawn from its natural parametrisation. Used to
/// check that trial functions vanish there.
Eigen::MatrixXd sample_boundary(const Domain& domain, Eigen::Index n, std::uint64_t seed);

}  // namespace pinneig
