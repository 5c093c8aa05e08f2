#include "pinneig/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

#include "pinneig/rng.hpp"

namespace pinneig {
namespace {

struct Weighted {
  double value;
  int multiplicity;
};

// Sorts, merges values within a relative gap and keeps the first `count`.
OracleSpectrum merge(std::vector<Weighted> values, int count, double rel_tol) {
  std::sort(values.begin(), values.end(), [](const Weighted& a, const Weighted& b) { return a.value < b.value; });
  OracleSpectrum out;
  for (const auto& v : values) {
    if (!out.eigenvalues.empty() &&
        std::abs(v.value - out.eigenvalues.back()) <= rel_tol * std::abs(v.value)) {
      out.multiplicities.back() += v.multiplicity;
      continue;
    }
    if (static_cast<int>(out.eigenvalues.size()) == count) break;
    out.eigenvalues.push_back(v.value);
    out.multiplicities.push_back(v.multiplicity);
  }
  return out;
}

double binomial(int n, int k) {
  if (k < 0 || n < k) return 0.0;
  return std::round(std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0)));
}

// Dimension of degree-l spherical harmonics in d dimensions.
int harmonic_multiplicity(int d, int l) {
  return static_cast<int>(binomial(l + d - 1, d - 1) - binomial(l + d - 3, d - 1));
}

double bessel_j_prime(double nu, double x) { return nu / x * bessel_j(nu, x) - bessel_j(nu + 1.0, x); }

// Boundary crossing along the segment from an interior node towards a
// neighbour outside, as a fraction of the segment, by bisection on membership.
double crossing_fraction(const Domain& domain, const Eigen::Vector2d& inside, const Eigen::Vector2d& outside) {
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    const Eigen::VectorXd p = inside + mid * (outside - inside);
    (contains(domain, p) ? lo : hi) = mid;
  }
  return std::max(0.5 * (lo + hi), 1e-6);
}

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// Modified Gram-Schmidt, applied twice; a collapsed column is replaced by a
// fresh random direction.
void orthonormalize(Eigen::MatrixXd& q, SplitMix64& rng) {
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index i = 0; i < j; ++i) q.col(j) -= q.col(i).dot(q.col(j)) * q.col(i);
    }
    double norm = q.col(j).norm();
    if (norm < 1e-12) {
      for (Eigen::Index r = 0; r < q.rows(); ++r) q(r, j) = rng.uniform(-1.0, 1.0);
      for (Eigen::Index i = 0; i < j; ++i) q.col(j) -= q.col(i).dot(q.col(j)) * q.col(i);
      norm = q.col(j).norm();
    }
    q.col(j) /= norm;
  }
}

struct SubspaceResult {
  std::vector<Weighted> values;
  bool converged = false;
};

SubspaceResult inverse_subspace_iteration(const SparseMatrix& a, int count, double shift, const FdOptions& opt) {
  const Eigen::Index n = a.rows();
  const Eigen::Index m = std::min<Eigen::Index>(n, 2 * count + 8);
  SplitMix64 rng(0x5eed);
  Eigen::MatrixXd x(n, m);
  for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] = rng.uniform(-1.0, 1.0);
  orthonormalize(x, rng);

  SparseMatrix shifted = a;
  for (Eigen::Index i = 0; i < n; ++i) shifted.coeffRef(i, i) += shift;
  Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cg;
  cg.setTolerance(opt.cg_tolerance);
  cg.setMaxIterations(static_cast<Eigen::Index>(20 * std::sqrt(static_cast<double>(n))) + 1000);
  cg.compute(shifted);

  Eigen::VectorXd ritz = Eigen::VectorXd::Ones(m);
  SubspaceResult result;
  for (int outer = 0; outer < opt.max_outer_iterations; ++outer) {
    Eigen::MatrixXd y(n, m);
    for (Eigen::Index j = 0; j < m; ++j) {
      const Eigen::VectorXd guess = x.col(j) / std::max(ritz[j] + shift, 1e-300);
      y.col(j) = cg.solveWithGuess(x.col(j), guess);
      if (cg.info() != Eigen::Success) return result;
    }
    orthonormalize(y, rng);
    const Eigen::MatrixXd ay = a * y;
    const Eigen::MatrixXd h = y.transpose() * ay;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (h + h.transpose()));
    ritz = eig.eigenvalues();
    x = y * eig.eigenvectors();
    const Eigen::MatrixXd ax = ay * eig.eigenvectors();

    // Accept once a converged prefix spans `count` distinct values plus one
    // further value that closes the last group.
    std::vector<Weighted> groups;
    bool done = false;
    for (Eigen::Index j = 0; j < m; ++j) {
      const double res = (ax.col(j) - ritz[j] * x.col(j)).norm() / std::abs(ritz[j]);
      if (res > opt.eigen_tolerance) break;
      if (!groups.empty() && std::abs(ritz[j] - groups.back().value) <= opt.merge_tolerance * std::abs(ritz[j])) {
        groups.back().multiplicity += 1;
        continue;
      }
      if (static_cast<int>(groups.size()) == count) {
        done = true;
        break;
      }
      groups.push_back({ritz[j], 1});
    }
    if (done || (static_cast<int>(groups.size()) >= count && m == n)) {
      result.values = std::move(groups);
      result.converged = true;
      return result;
    }
  }
  return result;
}

}  // namespace

OracleSpectrum rectangle_spectrum(const std::vector<double>& lengths, int count) {
  if (lengths.empty() || count < 1) throw std::invalid_argument("rectangle_spectrum needs lengths and count >= 1");
  for (double l : lengths) {
    if (!(l > 0.0)) throw std::invalid_argument("rectangle side lengths must be positive");
  }
  // Any of the `count` smallest distinct values has every m_i <= count.
  const int d = static_cast<int>(lengths.size());
  std::vector<Weighted> values;
  std::vector<int> m(d, 1);
  std::function<void(int, double)> enumerate = [&](int axis, double partial) {
    if (axis == d) {
      values.push_back({std::numbers::pi * std::numbers::pi * partial, 1});
      return;
    }
    for (int k = 1; k <= count; ++k) enumerate(axis + 1, partial + (k / lengths[axis]) * (k / lengths[axis]));
  };
  enumerate(0, 0.0);
  OracleSpectrum out = merge(std::move(values), count, 1e-12);
  out.provenance = Provenance::closed_form;
  std::ostringstream os;
  os << "rectangle";
  for (double l : lengths) os << " " << l;
  out.description = os.str();
  return out;
}

double bessel_j(double nu, double x) { return std::cyl_bessel_j(nu, x); }

double bessel_zero(double nu, int k) {
  if (!(nu >= 0.0) || k < 1) throw std::invalid_argument("bessel_zero needs nu >= 0 and k >= 1");
  // McMahon's expansion bounds the search window; zeros are then counted by
  // sign changes from x = nu, where J_nu has none below.
  const double mu = 4.0 * nu * nu;
  const double beta = (k + 0.5 * nu - 0.25) * std::numbers::pi;
  const double mcmahon = beta - (mu - 1.0) / (8.0 * beta) - 4.0 * (mu - 1.0) * (7.0 * mu - 31.0) / (3.0 * std::pow(8.0 * beta, 3));
  const double limit = std::max(mcmahon, beta) + nu + 10.0;
  const double step = 0.05;
  double a = std::max(nu, 1e-6);
  double fa = bessel_j(nu, a);
  int found = 0;
  double lo = 0.0, hi = 0.0;
  for (double b = a + step; b <= limit; b += step) {
    const double fb = bessel_j(nu, b);
    if (fa == 0.0 || (fa < 0.0) != (fb < 0.0)) {
      if (++found == k) {
        lo = a;
        hi = b;
        break;
      }
    }
    a = b;
    fa = fb;
  }
  if (found < k) throw std::logic_error("bessel_zero failed to bracket the requested zero");

  double flo = bessel_j(nu, lo);
  while (hi - lo > 1e-4) {
    const double mid = 0.5 * (lo + hi);
    const double fm = bessel_j(nu, mid);
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 50; ++it) {
    const double dx = bessel_j(nu, x) / bessel_j_prime(nu, x);
    double next = x - dx;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if ((bessel_j(nu, next) < 0.0) == (flo < 0.0)) {
      lo = next;
    } else {
      hi = next;
    }
    const bool small = std::abs(next - x) < 1e-13;
    x = next;
    if (small) break;
  }
  return x;
}

OracleSpectrum ball_spectrum(int dim, double radius, int count) {
  if (dim < 2 || dim > 4) throw std::invalid_argument("ball_spectrum supports d = 2, 3, 4");
  if (!(radius > 0.0) || count < 1) throw std::invalid_argument("ball_spectrum needs radius > 0 and count >= 1");
  constexpr int kMaxDegree = 12;
  constexpr int kMaxZero = 12;
  std::vector<Weighted> values;
  for (int l = 0; l <= kMaxDegree; ++l) {
    const double nu = 0.5 * dim - 1.0 + l;
    for (int k = 1; k <= kMaxZero; ++k) {
      const double j = bessel_zero(nu, k) / radius;
      values.push_back({j * j, harmonic_multiplicity(dim, l)});
    }
  }
  OracleSpectrum out = merge(std::move(values), count, 1e-12);
  out.provenance = Provenance::closed_form;
  std::ostringstream os;
  os << "ball d=" << dim << " R=" << radius;
  out.description = os.str();
  return out;
}

OracleSpectrum fd_spectrum(const Domain& domain, const Potential& potential, int grid_n, int count,
                           const FdOptions& options) {
  if (domain.dim() != 2) throw std::invalid_argument("fd_spectrum supports planar domains only");
  if (grid_n < 32) throw std::invalid_argument("fd_spectrum needs grid_n >= 32");
  if (count < 1) throw std::invalid_argument("fd_spectrum needs count >= 1");

  const auto& box = domain.bounding_box();
  const double hx = box[0].length() / grid_n, hy = box[1].length() / grid_n;
  const int nodes = grid_n + 1;
  auto node = [&](int i, int j) { return Eigen::Vector2d(box[0].lo + i * hx, box[1].lo + j * hy); };

  std::vector<int> index(static_cast<std::size_t>(nodes) * nodes, -1);
  int unknowns = 0;
  for (int j = 0; j < nodes; ++j)
    for (int i = 0; i < nodes; ++i) {
      const Eigen::VectorXd p = node(i, j);
      if (contains(domain, p)) index[j * nodes + i] = unknowns++;
    }
  if (unknowns < count) throw std::invalid_argument("fd grid has fewer interior nodes than requested eigenvalues");

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(unknowns) * 5);
  const int di[4] = {1, -1, 0, 0};
  const int dj[4] = {0, 0, 1, -1};
  for (int j = 0; j < nodes; ++j)
    for (int i = 0; i < nodes; ++i) {
      const int row = index[j * nodes + i];
      if (row < 0) continue;
      const Eigen::Vector2d p = node(i, j);
      double diag = potential_eval(potential, std::span<const double>(p.data(), 2));
      for (int dir = 0; dir < 4; ++dir) {
        const double h2 = dir < 2 ? hx * hx : hy * hy;
        const int ni = i + di[dir], nj = j + dj[dir];
        const bool in_grid = ni >= 0 && ni < nodes && nj >= 0 && nj < nodes;
        const int col = in_grid ? index[nj * nodes + ni] : -1;
        if (col >= 0) {
          diag += 1.0 / h2;
          triplets.emplace_back(row, col, -1.0 / h2);
        } else {
          const Eigen::Vector2d q = p + Eigen::Vector2d(di[dir] * hx, dj[dir] * hy);
          diag += 1.0 / (crossing_fraction(domain, p, q) * h2);
        }
      }
      triplets.emplace_back(row, row, diag);
    }
  SparseMatrix a(unknowns, unknowns);
  a.setFromTriplets(triplets.begin(), triplets.end());

  double shift = 0.0;
  SubspaceResult res = inverse_subspace_iteration(a, count, shift, options);
  if (!res.converged) {
    shift = 0.01 * a.diagonal().maxCoeff();
    res = inverse_subspace_iteration(a, count, shift, options);
  }
  if (!res.converged) throw std::runtime_error("fd_spectrum: conjugate gradient or subspace iteration did not converge");

  OracleSpectrum out;
  for (const auto& g : res.values) {
    out.eigenvalues.push_back(g.value);
    out.multiplicities.push_back(g.multiplicity);
  }
  out.provenance = Provenance::finite_difference;
  out.grid_n = grid_n;
  out.description = domain.kind_name() + " fd grid_n=" + std::to_string(grid_n);
  return out;
}

UpperBoundCurve upper_bound_curve(const OracleSpectrum& spectrum, const std::vector<double>& grid) {
  if (spectrum.eigenvalues.empty()) throw std::invalid_argument("upper bound needs a nonempty spectrum");
  UpperBoundCurve out;
  const double largest = spectrum.eigenvalues.back();
  bool warned = false;
  for (double e : grid) {
    double bound = std::numeric_limits<double>::infinity();
    for (double ek : spectrum.eigenvalues) bound = std::min(bound, (ek - e) * (ek - e));
    out.points.push_back({e, bound});
    if (e > largest && !warned) {
      std::ostringstream os;
      os << "E = " << e << " exceeds the largest provided eigenvalue " << largest
         << "; the bound may be loose there";
      out.warnings.push_back(os.str());
      warned = true;
    }
  }
  return out;
}

}  // namespace pinneig
