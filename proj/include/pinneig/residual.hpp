#pragma once

#include <variant>

#include "pinneig/geometry.hpp"
#include "pinneig/jet.hpp"
#include "pinneig/netcalc.hpp"

namespace pinneig {

/// V = 0 inside the domain; the Dirichlet condition comes from the boundary factor.
struct ZeroPotential {};

/// V(x) = (omega^2 / 2) |x|^2.
struct HarmonicPotential {
  double omega = 1.0;
};

using Potential = std::variant<ZeroPotential, HarmonicPotential>;

/// -Laplace(u) + V u = E u.
struct LinearOperator {
  Potential potential = ZeroPotential{};
};

/// -div(|grad u|^(p-2) grad u) = E |u|^(p-2) u, with |grad u| regularised as
/// sqrt(|grad u|^2 + grad_floor^2).
struct PLaplaceOperator {
  double p = 2.0;
  double grad_floor = 1e-8;
};

using OperatorSpec = std::variant<LinearOperator, PLaplaceOperator>;

/// Throws std::invalid_argument if omega <= 0, p <= 1 or grad_floor < 0.
void validate(const OperatorSpec& op);

/// Exponent of the normalisation integral: 2 for linear operators, p otherwise.
double norm_exponent(const OperatorSpec& op);

struct LossBreakdown {
  double total = 0.0;
  double residual_term = 0.0;
  double penalty_term = 0.0;
  double norm_estimate = 0.0;
  double mu_used = 0.0;

  bool operator==(const LossBreakdown&) const = default;
};

struct LossConfig {
  double mu0 = 100.0;
  Eigen::Index n_train = 2048;
  Eigen::Index n_val = 2048;
  bool resample_each_step = false;
  /// Draw the reported-loss batch independently of the training batch.
  /// Off by default: the curve is then evaluated on the training points.
  bool independent_validation = false;
};

double potential_eval(const Potential& v, std::span<const double> x);

/// trace(H) - V u + E u.
double residual_linear(const Jet2& jet, double v_at_x, double e);

/// Expanded p-Laplacian s^(p-2) tr(H) + (p-2) s^(p-4) g'Hg with
/// s = sqrt(|g|^2 + eps^2). Exactly tr(H) at p = 2. Throws NumericalError
/// when the result is not finite.
double p_laplacian(const Jet2& jet, double p, double eps);

/// p_laplacian + E |u|^(p-2) u.
double residual_p(const Jet2& jet, double p, double e, double eps);

/// mu0 * max(1, E^2).
double mu_schedule(double mu0, double e);

/// Penalised Monte Carlo loss as a jet closure over trial jets u on `points`.
/// The same closure is used for reporting and for training, so the reported
/// value matches loss_gradient's bit-for-bit.
class ResidualLoss {
 public:
  ResidualLoss(OperatorSpec op, double e, double mu0, double domain_volume, const Eigen::MatrixXd& points);

  /// Loss value, optionally with adjoints dLoss/du-jet.
  double operator()(const JetBatch& u, JetBatch* adjoint) const;

  /// Loss value with its residual/penalty split.
  LossBreakdown breakdown(const JetBatch& u) const;

  double mu() const { return mu_; }

 private:
  LossBreakdown evaluate(const JetBatch& u, JetBatch* adjoint) const;

  OperatorSpec op_;
  double e_;
  double mu_;
  double volume_;
  Eigen::VectorXd potential_;  // V at each point
};

/// Evaluates the penalised loss on a cached trial batch.
LossBreakdown assemble_loss(const MlpParams& params, const TrialBatch& trial, const OperatorSpec& op, double e,
                            const LossConfig& cfg, const Domain& domain);

LossBreakdown assemble_loss(const MlpParams& params, const PointBatch& batch, const OperatorSpec& op, double e,
                            const LossConfig& cfg, const Domain& domain);

}  // namespace pinneig
