#include "pinneig/geometry.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "pinneig/errors.hpp"
#include "pinneig/rng.hpp"

namespace pinneig {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double cross2(const Eigen::Vector2d& u, const Eigen::Vector2d& v) { return u.x() * v.y() - u.y() * v.x(); }

// Barycentric coordinate of `vertex` w.r.t. the opposite edge (p, q), as an
// affine function gradient . x + offset.
struct Affine2 {
  Eigen::Vector2d gradient;
  double offset;
  double operator()(const Eigen::Vector2d& x) const { return gradient.dot(x) + offset; }
};

Affine2 barycentric(const Eigen::Vector2d& vertex, const Eigen::Vector2d& p, const Eigen::Vector2d& q) {
  const Eigen::Vector2d edge = q - p;
  const double denom = cross2(edge, vertex - p);
  // cross(edge, x - p) = edge.x (x.y - p.y) - edge.y (x.x - p.x)
  Eigen::Vector2d g(-edge.y(), edge.x());
  g /= denom;
  return {g, -g.dot(p)};
}

std::array<Affine2, 3> barycentrics(const Triangle& t) {
  return {barycentric(t.a, t.b, t.c), barycentric(t.b, t.c, t.a), barycentric(t.c, t.a, t.b)};
}

void check_dim(const Domain& domain, std::size_t n) {
  if (static_cast<int>(n) != domain.dim()) {
    throw std::invalid_argument("point has dimension " + std::to_string(n) + " but domain is " +
                                std::to_string(domain.dim()) + "-dimensional");
  }
}

double squared_norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

}  // namespace

Domain Domain::ball(int dim, double radius) {
  if (dim < 1) throw std::invalid_argument("ball dimension must be at least 1");
  if (!(radius > 0.0)) throw std::invalid_argument("ball radius must be positive");
  return Domain(Ball{dim, radius}, dim, std::vector<Interval>(dim, Interval{-radius, radius}));
}

Domain Domain::rectangle(std::vector<Interval> sides) {
  if (sides.empty()) throw std::invalid_argument("rectangle needs at least one side");
  for (const auto& s : sides) {
    if (!(s.hi > s.lo)) throw std::invalid_argument("rectangle sides must be nonempty intervals");
  }
  const int dim = static_cast<int>(sides.size());
  auto box = sides;
  return Domain(Rectangle{std::move(sides)}, dim, std::move(box));
}

Domain Domain::annulus(double inner, double outer) {
  if (!(inner > 0.0) || !(outer > inner)) {
    throw std::invalid_argument("annulus radii must satisfy 0 < inner < outer");
  }
  return Domain(Annulus{inner, outer}, 2, {{-outer, outer}, {-outer, outer}});
}

Domain Domain::triangle(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c) {
  const double area2 = cross2(b - a, c - a);
  const double scale = std::max({(b - a).squaredNorm(), (c - a).squaredNorm(), (c - b).squaredNorm()});
  if (!(std::abs(area2) > 1e-12 * scale)) throw std::invalid_argument("triangle vertices are collinear");
  std::vector<Interval> box(2);
  for (int i = 0; i < 2; ++i) {
    box[i] = {std::min({a[i], b[i], c[i]}), std::max({a[i], b[i], c[i]})};
  }
  return Domain(Triangle{a, b, c}, 2, std::move(box));
}

std::string Domain::kind_name() const {
  return std::visit(Overloaded{[](const Ball&) { return std::string("ball"); },
                               [](const Rectangle&) { return std::string("rectangle"); },
                               [](const Annulus&) { return std::string("annulus"); },
                               [](const Triangle&) { return std::string("triangle"); }},
                    shape_);
}

bool contains(const Domain& domain, std::span<const double> x) {
  check_dim(domain, x.size());
  return std::visit(
      Overloaded{
          [&](const Ball& b) { return squared_norm(x) < b.radius * b.radius; },
          [&](const Rectangle& r) {
            for (std::size_t i = 0; i < x.size(); ++i) {
              if (!(x[i] > r.sides[i].lo && x[i] < r.sides[i].hi)) return false;
            }
            return true;
          },
          [&](const Annulus& a) {
            const double r2 = squared_norm(x);
            return r2 > a.inner * a.inner && r2 < a.outer * a.outer;
          },
          [&](const Triangle& t) {
            const Eigen::Vector2d p(x[0], x[1]);
            for (const auto& l : barycentrics(t)) {
              if (!(l(p) > 0.0)) return false;
            }
            return true;
          }},
      domain.shape());
}

PointBatch sample_interior(const Domain& domain, Eigen::Index n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_interior needs n >= 1");
  constexpr std::uint64_t kCheckAfter = 1'000'000;
  constexpr double kMinAcceptance = 1e-3;

  const int d = domain.dim();
  const auto& box = domain.bounding_box();
  SplitMix64 rng(seed);
  PointBatch batch;
  batch.seed = seed;
  batch.points.resize(d, n);
  std::vector<double> x(d);
  Eigen::Index accepted = 0;
  std::uint64_t proposals = 0;
  while (accepted < n) {
    for (int i = 0; i < d; ++i) x[i] = rng.uniform(box[i].lo, box[i].hi);
    ++proposals;
    if (contains(domain, x)) {
      for (int i = 0; i < d; ++i) batch.points(i, accepted) = x[i];
      ++accepted;
    }
    if (proposals >= kCheckAfter && static_cast<double>(accepted) < kMinAcceptance * proposals) {
      throw DegenerateDomainError("rejection sampling accepted " + std::to_string(accepted) + " of " +
                                  std::to_string(proposals) + " proposals; domain looks degenerate");
    }
  }
  batch.proposals = proposals;
  return batch;
}

Jet2 boundary_factor(const Domain& domain, std::span<const double> x) {
  check_dim(domain, x.size());
  const int d = domain.dim();
  Jet2 jet(d);
  std::visit(
      Overloaded{
          [&](const Ball& b) {
            jet.value = b.radius * b.radius - squared_norm(x);
            for (int i = 0; i < d; ++i) {
              jet.gradient[i] = -2.0 * x[i];
              jet.hessian(i, i) = -2.0;
            }
          },
          [&](const Rectangle& r) {
            // B = prod_i f_i(x_i), f_i = c_i (x_i - a_i)(b_i - x_i)
            std::vector<double> f(d), df(d), ddf(d);
            for (int i = 0; i < d; ++i) {
              const double a = r.sides[i].lo, b = r.sides[i].hi;
              const double c = 4.0 / ((b - a) * (b - a));
              f[i] = c * (x[i] - a) * (b - x[i]);
              df[i] = c * (a + b - 2.0 * x[i]);
              ddf[i] = -2.0 * c;
            }
            auto product_except = [&](int skip1, int skip2) {
              double p = 1.0;
              for (int k = 0; k < d; ++k) {
                if (k != skip1 && k != skip2) p *= f[k];
              }
              return p;
            };
            jet.value = product_except(-1, -1);
            for (int i = 0; i < d; ++i) {
              jet.gradient[i] = df[i] * product_except(i, -1);
              jet.hessian(i, i) = ddf[i] * product_except(i, -1);
              for (int j = i + 1; j < d; ++j) {
                const double h = df[i] * df[j] * product_except(i, j);
                jet.hessian(i, j) = h;
                jet.hessian(j, i) = h;
              }
            }
          },
          [&](const Annulus& a) {
            const double r2 = squared_norm(x);
            const double f = r2 - a.inner * a.inner;
            const double g = a.outer * a.outer - r2;
            jet.value = f * g;
            for (int i = 0; i < d; ++i) {
              jet.gradient[i] = 2.0 * x[i] * (g - f);
              for (int j = 0; j < d; ++j) {
                jet.hessian(i, j) = (i == j ? 2.0 * (g - f) : 0.0) - 8.0 * x[i] * x[j];
              }
            }
          },
          [&](const Triangle& t) {
            const Eigen::Vector2d p(x[0], x[1]);
            const auto l = barycentrics(t);
            const double v0 = l[0](p), v1 = l[1](p), v2 = l[2](p);
            const auto &g0 = l[0].gradient, &g1 = l[1].gradient, &g2 = l[2].gradient;
            jet.value = 27.0 * v0 * v1 * v2;
            jet.gradient = 27.0 * (g0 * (v1 * v2) + g1 * (v0 * v2) + g2 * (v0 * v1));
            const Eigen::Matrix2d h = (g0 * g1.transpose() + g1 * g0.transpose()) * v2 +
                                      (g0 * g2.transpose() + g2 * g0.transpose()) * v1 +
                                      (g1 * g2.transpose() + g2 * g1.transpose()) * v0;
            jet.hessian = 27.0 * h;
          }},
      domain.shape());
  return jet;
}

JetBatch boundary_factor(const Domain& domain, const Eigen::MatrixXd& points) {
  JetBatch out(domain.dim(), points.cols());
  for (Eigen::Index p = 0; p < points.cols(); ++p) {
    const Eigen::VectorXd x = points.col(p);
    out.set(p, boundary_factor(domain, x));
  }
  return out;
}

double volume(const Domain& domain) {
  return std::visit(
      Overloaded{[](const Ball& b) {
                   const double half = 0.5 * b.dim;
                   return std::pow(std::numbers::pi, half) / std::tgamma(half + 1.0) *
                          std::pow(b.radius, b.dim);
                 },
                 [](const Rectangle& r) {
                   double v = 1.0;
                   for (const auto& s : r.sides) v *= s.length();
                   return v;
                 },
                 [](const Annulus& a) {
                   return std::numbers::pi * (a.outer * a.outer - a.inner * a.inner);
                 },
                 [](const Triangle& t) { return 0.5 * std::abs(cross2(t.b - t.a, t.c - t.a)); }},
      domain.shape());
}

Eigen::MatrixXd sample_boundary(const Domain& domain, Eigen::Index n, std::uint64_t seed) {
  const int d = domain.dim();
  SplitMix64 rng(seed);
  Eigen::MatrixXd out(d, n);
  auto pick = [&](int choices) {
    return std::min(choices - 1, static_cast<int>(rng.uniform() * choices));
  };
  for (Eigen::Index p = 0; p < n; ++p) {
    std::visit(
        Overloaded{
            [&](const Ball& b) {
              // Box-Muller normal direction, scaled to the sphere.
              Eigen::VectorXd g(d);
              for (int i = 0; i < d; ++i) {
                const double u1 = 1.0 - rng.uniform(), u2 = rng.uniform();
                g[i] = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
              }
              out.col(p) = b.radius * g / g.norm();
            },
            [&](const Rectangle& r) {
              const int face = pick(2 * d);
              for (int i = 0; i < d; ++i) out(i, p) = rng.uniform(r.sides[i].lo, r.sides[i].hi);
              const int axis = face / 2;
              out(axis, p) = (face % 2 == 0) ? r.sides[axis].lo : r.sides[axis].hi;
            },
            [&](const Annulus& a) {
              const double radius = pick(2) == 0 ? a.inner : a.outer;
              const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
              out(0, p) = radius * std::cos(theta);
              out(1, p) = radius * std::sin(theta);
            },
            [&](const Triangle& t) {
              const std::array<Eigen::Vector2d, 3> v{t.a, t.b, t.c};
              const int edge = pick(3);
              const double s = rng.uniform();
              out.col(p) = v[edge] + s * (v[(edge + 1) % 3] - v[edge]);
            }},
        domain.shape());
  }
  return out;
}

}  // namespace pinneig
