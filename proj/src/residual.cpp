#include "pinneig/residual.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "pinneig/errors.hpp"

namespace pinneig {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// Raw view of one point's jet; H is column-major d x d.
struct JetView {
  double value;
  const double* g;
  const double* h;
  int d;

  double trace() const {
    double t = 0.0;
    for (int i = 0; i < d; ++i) t += h[i + d * i];
    return t;
  }
  double grad_sq() const {
    double s = 0.0;
    for (int i = 0; i < d; ++i) s += g[i] * g[i];
    return s;
  }
  double gHg() const {
    double q = 0.0;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) q += g[i] * h[i + d * j] * g[j];
    return q;
  }
};

JetView view(const Jet2& j) { return {j.value, j.gradient.data(), j.hessian.data(), j.dim()}; }

JetView view(const JetBatch& b, Eigen::Index p) {
  return {b.value(p), b.gradient.col(p).data(), b.hessian.col(p).data(), b.dim()};
}

double linear_residual(const JetView& u, double v, double e) { return u.trace() - v * u.value + e * u.value; }

double signed_power(double u, double p) {
  if (p == 2.0) return u;
  if (u == 0.0) return 0.0;
  return std::pow(std::abs(u), p - 2.0) * u;
}

double plap(const JetView& u, double p, double eps) {
  const double lap = u.trace();
  if (p == 2.0) return lap;
  const double s = std::sqrt(u.grad_sq() + eps * eps);
  const double first = std::pow(s, p - 2.0) * lap;
  const double q = u.gHg();
  const double second = q == 0.0 ? 0.0 : (p - 2.0) * std::pow(s, p - 4.0) * q;
  return first + second;
}

double plap_residual(const JetView& u, double p, double e, double eps) {
  return plap(u, p, eps) + e * signed_power(u.value, p);
}

}  // namespace

void validate(const OperatorSpec& op) {
  std::visit(Overloaded{[](const LinearOperator& l) {
                          if (const auto* h = std::get_if<HarmonicPotential>(&l.potential)) {
                            if (!(h->omega > 0.0)) throw std::invalid_argument("omega must be positive");
                          }
                        },
                        [](const PLaplaceOperator& pl) {
                          if (!(pl.p > 1.0)) throw std::invalid_argument("p must exceed 1");
                          if (!(pl.grad_floor >= 0.0)) {
                            throw std::invalid_argument("grad_floor must be non-negative");
                          }
                        }},
             op);
}

double norm_exponent(const OperatorSpec& op) {
  if (const auto* pl = std::get_if<PLaplaceOperator>(&op)) return pl->p;
  return 2.0;
}

double potential_eval(const Potential& v, std::span<const double> x) {
  return std::visit(Overloaded{[](const ZeroPotential&) { return 0.0; },
                               [&](const HarmonicPotential& h) {
                                 double r2 = 0.0;
                                 for (double c : x) r2 += c * c;
                                 return 0.5 * h.omega * h.omega * r2;
                               }},
                    v);
}

double residual_linear(const Jet2& jet, double v_at_x, double e) { return linear_residual(view(jet), v_at_x, e); }

double p_laplacian(const Jet2& jet, double p, double eps) {
  const double r = plap(view(jet), p, eps);
  if (!std::isfinite(r)) throw NumericalError("p-Laplacian is not finite (critical point with p < 2?)");
  return r;
}

double residual_p(const Jet2& jet, double p, double e, double eps) {
  const double r = plap_residual(view(jet), p, e, eps);
  if (!std::isfinite(r)) throw NumericalError("p-Laplacian residual is not finite");
  return r;
}

double mu_schedule(double mu0, double e) { return mu0 * std::max(1.0, e * e); }

ResidualLoss::ResidualLoss(OperatorSpec op, double e, double mu0, double domain_volume,
                           const Eigen::MatrixXd& points)
    : op_(std::move(op)), e_(e), mu_(mu_schedule(mu0, e)), volume_(domain_volume), potential_(points.cols()) {
  validate(op_);
  const Potential pot = std::holds_alternative<LinearOperator>(op_) ? std::get<LinearOperator>(op_).potential
                                                                    : Potential{ZeroPotential{}};
  for (Eigen::Index p = 0; p < points.cols(); ++p) {
    potential_[p] = potential_eval(pot, std::span<const double>(points.col(p).data(), points.rows()));
  }
}

double ResidualLoss::operator()(const JetBatch& u, JetBatch* adjoint) const { return evaluate(u, adjoint).total; }

LossBreakdown ResidualLoss::breakdown(const JetBatch& u) const { return evaluate(u, nullptr); }

LossBreakdown ResidualLoss::evaluate(const JetBatch& u, JetBatch* adjoint) const {
  const Eigen::Index n = u.size();
  if (n < 1) throw std::invalid_argument("loss needs a nonempty batch");
  if (potential_.size() != n) throw std::invalid_argument("jet batch does not match the loss points");
  const int d = u.dim();
  const auto* pl = std::get_if<PLaplaceOperator>(&op_);
  const double p = pl ? pl->p : 2.0;
  const double eps = pl ? pl->grad_floor : 0.0;

  Eigen::VectorXd residuals(n);
  double res_sum = 0.0;
  double norm_sum = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const JetView j = view(u, k);
    const double r = pl ? plap_residual(j, p, e_, eps) : linear_residual(j, potential_[k], e_);
    if (!std::isfinite(r)) throw NumericalError("residual is not finite", k);
    residuals[k] = r;
    res_sum += r * r;
    norm_sum += (p == 2.0) ? j.value * j.value : std::pow(std::abs(j.value), p);
  }
  const double scale = volume_ / static_cast<double>(n);
  LossBreakdown out;
  out.residual_term = volume_ * (res_sum / static_cast<double>(n));
  out.norm_estimate = volume_ * (norm_sum / static_cast<double>(n));
  out.mu_used = mu_;
  const double gap = out.norm_estimate - 1.0;
  out.penalty_term = mu_ * (gap * gap);
  out.total = out.residual_term + out.penalty_term;

  if (adjoint) {
    *adjoint = JetBatch(d, n);
    const double norm_weight = 2.0 * mu_ * gap * scale;
    for (Eigen::Index k = 0; k < n; ++k) {
      const JetView j = view(u, k);
      const double rbar = 2.0 * scale * residuals[k];
      const double uval = j.value;
      if (!pl) {
        adjoint->value(k) = rbar * (e_ - potential_[k]) + norm_weight * 2.0 * uval;
        for (int i = 0; i < d; ++i) adjoint->hess(i, i, k) = rbar;
        continue;
      }
      // p-Laplacian: r = a tr(H) + b g'Hg + E phi(u).
      double dphi = 1.0, dnorm = 2.0 * uval;
      if (p != 2.0) {
        dphi = uval == 0.0 ? 0.0 : (p - 1.0) * std::pow(std::abs(uval), p - 2.0);
        dnorm = p * signed_power(uval, p);
      }
      adjoint->value(k) = rbar * e_ * dphi + norm_weight * dnorm;
      if (p == 2.0) {
        for (int i = 0; i < d; ++i) adjoint->hess(i, i, k) = rbar;
        continue;
      }
      const double s2 = j.grad_sq() + eps * eps;
      if (s2 == 0.0) continue;
      const double s = std::sqrt(s2);
      const double a = std::pow(s, p - 2.0);
      const double b = (p - 2.0) * std::pow(s, p - 4.0);
      const double lap = j.trace();
      const double q = j.gHg();
      const double radial = b * lap + b * (p - 4.0) * q / s2;
      for (int i = 0; i < d; ++i) {
        double hg = 0.0;
        for (int m = 0; m < d; ++m) hg += (j.h[i + d * m] + j.h[m + d * i]) * j.g[m];
        adjoint->gradient(i, k) = rbar * (radial * j.g[i] + b * hg);
        for (int m = 0; m < d; ++m) {
          adjoint->hess(i, m, k) = rbar * ((i == m ? a : 0.0) + b * j.g[i] * j.g[m]);
        }
      }
    }
  }
  return out;
}

LossBreakdown assemble_loss(const MlpParams& params, const TrialBatch& trial, const OperatorSpec& op, double e,
                            const LossConfig& cfg, const Domain& domain) {
  const ResidualLoss loss(op, e, cfg.mu0, volume(domain), trial.batch.points);
  return loss.breakdown(trial_jets(params, trial));
}

LossBreakdown assemble_loss(const MlpParams& params, const PointBatch& batch, const OperatorSpec& op, double e,
                            const LossConfig& cfg, const Domain& domain) {
  return assemble_loss(params, make_trial_batch(domain, batch), op, e, cfg, domain);
}

}  // namespace pinneig
