#pragma once

#include <Eigen/Dense>

namespace pinneig {

/// Value, spatial gradient and spatial Hessian of a scalar field at one point.
struct Jet2 {
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;

  Jet2() = default;
  explicit Jet2(int dim)
      : gradient(Eigen::VectorXd::Zero(dim)), hessian(Eigen::MatrixXd::Zero(dim, dim)) {}

  int dim() const { return static_cast<int>(gradient.size()); }
  double laplacian() const {
    double trace = 0.0;
    for (int i = 0; i < dim(); ++i) trace += hessian(i, i);
    return trace;
  }
};

// Jets of a scalar field over a batch of points, one column per point.
// Hessian column p holds H(i, j) at row i + dim * j.
struct JetBatch {
  Eigen::RowVectorXd value;
  Eigen::MatrixXd gradient;
  Eigen::MatrixXd hessian;

  JetBatch() = default;
  JetBatch(int dim, Eigen::Index n)
      : value(Eigen::RowVectorXd::Zero(n)),
        gradient(Eigen::MatrixXd::Zero(dim, n)),
        hessian(Eigen::MatrixXd::Zero(dim * dim, n)) {}

  int dim() const { return static_cast<int>(gradient.rows()); }
  Eigen::Index size() const { return value.size(); }

  double hess(int i, int j, Eigen::Index p) const { return hessian(i + dim() * j, p); }
  double& hess(int i, int j, Eigen::Index p) { return hessian(i + dim() * j, p); }

  double laplacian(Eigen::Index p) const {
    double trace = 0.0;
    for (int i = 0; i < dim(); ++i) trace += hess(i, i, p);
    return trace;
  }

  Jet2 jet(Eigen::Index p) const {
    Jet2 out(dim());
    out.value = value(p);
    out.gradient = gradient.col(p);
    for (int j = 0; j < dim(); ++j)
      for (int i = 0; i < dim(); ++i) out.hessian(i, j) = hess(i, j, p);
    return out;
  }

  void set(Eigen::Index p, const Jet2& jet) {
    value(p) = jet.value;
    gradient.col(p) = jet.gradient;
    for (int j = 0; j < dim(); ++j)
      for (int i = 0; i < dim(); ++i) hess(i, j, p) = jet.hessian(i, j);
  }
};

}  // namespace pinneig
