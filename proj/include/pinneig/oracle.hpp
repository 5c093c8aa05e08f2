#pragma once

#include <string>
#include <vector>

#include "pinneig/geometry.hpp"
#include "pinneig/residual.hpp"

namespace pinneig {

enum class Provenance { closed_form, finite_difference };

/// Reference eigenvalues, ascending, with repeated values merged.
struct OracleSpectrum {
  std::vector<double> eigenvalues;
  std::vector<int> multiplicities;
  Provenance provenance = Provenance::closed_form;
  int grid_n = 0;           ///< finite-difference resolution, 0 for closed forms
  std::string description;  ///< domain and potential
};

/// The `count` smallest distinct values of pi^2 sum_i (m_i / L_i)^2, m_i >= 1.
OracleSpectrum rectangle_spectrum(const std::vector<double>& lengths, int count);

/// Bessel function of the first kind.
double bessel_j(double nu, double x);

/// k-th positive zero of J_nu (k >= 1), to absolute tolerance 1e-10.
double bessel_zero(double nu, int k);

/// Dirichlet Laplacian on the d-ball of radius R: the `count` smallest
/// distinct (j_{nu,k} / R)^2 with nu = d/2 - 1 + l.
OracleSpectrum ball_spectrum(int dim, double radius, int count);

struct FdOptions {
  double cg_tolerance = 1e-10;
  int max_outer_iterations = 500;
  double eigen_tolerance = 1e-9;  ///< relative eigen-residual for convergence
  double merge_tolerance = 1e-7;  ///< relative gap below which values merge
};

/// `count` smallest distinct eigenvalues of the 5-point discretisation of
/// -Laplace + V on a planar domain. Nodes strictly inside the domain are the
/// unknowns; a node whose neighbour lies outside uses the distance to the
/// boundary along that grid line in its diagonal entry, which keeps the
/// matrix symmetric. Solved by shifted inverse subspace iteration with
/// Gram-Schmidt orthogonalisation and conjugate-gradient solves.
OracleSpectrum fd_spectrum(const Domain& domain, const Potential& potential, int grid_n, int count,
                           const FdOptions& options = {});

struct UpperBoundPoint {
  double e;
  double bound;
};

struct UpperBoundCurve {
  std::vector<UpperBoundPoint> points;
  std::vector<std::string> warnings;
};

/// U(E) = min_k (E_k - E)^2 on the given grid.
UpperBoundCurve upper_bound_curve(const OracleSpectrum& spectrum, const std::vector<double>& grid);

}  // namespace pinneig
