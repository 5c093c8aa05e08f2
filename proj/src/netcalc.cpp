#include "pinneig/netcalc.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "pinneig/errors.hpp"
#include "pinneig/rng.hpp"

namespace pinneig {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;

// Jets travel through the network as column blocks of one wide matrix:
// block 0 holds values, blocks 1..d first derivatives, then one block per
// Hessian entry (i <= j).
struct BlockLayout {
  int dim;
  Index n;
  std::vector<std::pair<int, int>> pairs;

  BlockLayout(int d, Index points) : dim(d), n(points) {
    for (int i = 0; i < d; ++i)
      for (int j = i; j < d; ++j) pairs.emplace_back(i, j);
  }
  Index blocks() const { return 1 + dim + static_cast<Index>(pairs.size()); }
  Index grad_block(int i) const { return 1 + i; }
  Index pair_block(std::size_t p) const { return 1 + dim + static_cast<Index>(p); }
};

template <class M>
auto block(M& m, Index b, Index n) {
  return m.middleCols(b * n, n);
}

// tanh via the vectorised exp; saturates cleanly to +-1.
template <class Expr>
auto fast_tanh(const Expr& z) {
  return 1.0 - 2.0 / ((2.0 * z.array()).exp() + 1.0);
}

// Forward jets and the buffers reused by the reverse sweep. One instance per
// thread, so repeated steps on a fixed batch do not reallocate.
class JetPass {
 public:
  void forward(const MlpParams& params, const MatrixXd& x) {
    layout_ = BlockLayout(params.shape().input_dim, x.cols());
    const Index n = x.cols();
    const int d = layout_.dim;
    const auto w1 = params.w1();
    const auto w2 = params.w2();
    const Index h1 = w1.rows(), h2 = w2.rows();
    const Index nb = layout_.blocks();

    z1_.noalias() = w1 * x;
    z1_.colwise() += params.b1();
    t1_ = fast_tanh(z1_).matrix();
    s1_ = (1.0 - t1_.array().square()).matrix();
    q1_ = (-2.0 * t1_.array() * s1_.array()).matrix();

    a1_.resize(h1, nb * n);
    block(a1_, 0, n) = t1_;
    for (int i = 0; i < d; ++i) {
      block(a1_, layout_.grad_block(i), n) = (s1_.array().colwise() * w1.col(i).array()).matrix();
    }
    for (std::size_t p = 0; p < layout_.pairs.size(); ++p) {
      const auto [i, j] = layout_.pairs[p];
      const Eigen::ArrayXd wij = w1.col(i).array() * w1.col(j).array();
      block(a1_, layout_.pair_block(p), n) = (q1_.array().colwise() * wij).matrix();
    }

    z2_.resize(h2, nb * n);
    z2_.noalias() = w2 * a1_;
    block(z2_, 0, n).colwise() += params.b2();
    t2_ = fast_tanh(block(z2_, 0, n)).matrix();
    s2_ = (1.0 - t2_.array().square()).matrix();
    q2_ = (-2.0 * t2_.array() * s2_.array()).matrix();

    a2_.resize(h2, nb * n);
    block(a2_, 0, n) = t2_;
    for (int i = 0; i < d; ++i) {
      const Index b = layout_.grad_block(i);
      block(a2_, b, n) = (s2_.array() * block(z2_, b, n).array()).matrix();
    }
    for (std::size_t p = 0; p < layout_.pairs.size(); ++p) {
      const auto [i, j] = layout_.pairs[p];
      const Index b = layout_.pair_block(p);
      block(a2_, b, n) = (q2_.array() * block(z2_, layout_.grad_block(i), n).array() *
                              block(z2_, layout_.grad_block(j), n).array() +
                          s2_.array() * block(z2_, b, n).array())
                             .matrix();
    }

    out_.resize(nb * n);
    out_.noalias() = params.w3().transpose() * a2_;
    block(out_, 0, n).array() += params.b3();
  }

  JetBatch jets() const {
    const Index n = layout_.n;
    const int d = layout_.dim;
    JetBatch j(d, n);
    j.value = block(out_, 0, n);
    for (int i = 0; i < d; ++i) j.gradient.row(i) = block(out_, layout_.grad_block(i), n);
    for (std::size_t p = 0; p < layout_.pairs.size(); ++p) {
      const auto [a, b] = layout_.pairs[p];
      const auto src = block(out_, layout_.pair_block(p), n);
      j.hessian.row(a + d * b) = src;
      if (a != b) j.hessian.row(b + d * a) = src;
    }
    return j;
  }

  ParamGradient backward(const MlpParams& params, const MatrixXd& x, const JetBatch& adj) {
    const Index n = layout_.n;
    const int d = layout_.dim;
    const Index nb = layout_.blocks();
    const auto w1 = params.w1();
    const auto w2 = params.w2();
    ParamGradient grad(params.shape());

    // Adjoint of the output row, in block layout. Symmetric Hessian entries
    // share one block, so their adjoints add.
    obar_.resize(nb * n);
    block(obar_, 0, n) = adj.value;
    for (int i = 0; i < d; ++i) block(obar_, layout_.grad_block(i), n) = adj.gradient.row(i);
    for (std::size_t p = 0; p < layout_.pairs.size(); ++p) {
      const auto [a, b] = layout_.pairs[p];
      auto dst = block(obar_, layout_.pair_block(p), n);
      dst = adj.hessian.row(a + d * b);
      if (a != b) dst += adj.hessian.row(b + d * a);
    }

    grad.b3() = block(obar_, 0, n).sum();
    grad.w3().noalias() = a2_ * obar_.transpose();
    a2bar_.noalias() = params.w3() * obar_;

    // Layer-2 tanh.
    z2bar_.resize(a2bar_.rows(), nb * n);
    s2bar_.setZero(a2bar_.rows(), n);
    q2bar_.setZero(a2bar_.rows(), n);
    for (int i = 0; i < d; ++i) {
      const Index b = layout_.grad_block(i);
      block(z2bar_, b, n) = (s2_.array() * block(a2bar_, b, n).array()).matrix();
      s2bar_ += block(a2bar_, b, n).array() * block(z2_, b, n).array();
    }
    for (std::size_t p = 0; p < layout_.pairs.size(); ++p) {
      const auto [i, j] = layout_.pairs[p];
      const Index b = layout_.pair_block(p);
      const auto abar = block(a2bar_, b, n).array();
      const auto gi = block(z2_, layout_.grad_block(i), n).array();
      const auto gj = block(z2_, layout_.grad_block(j), n).array();
      block(z2bar_, b, n) = (s2_.array() * abar).matrix();
      s2bar_ += abar * block(z2_, b, n).array();
      q2bar_ += abar * gi * gj;
      weighted_ = abar * q2_.array();
      block(z2bar_, layout_.grad_block(i), n).array() += weighted_ * gj;
      block(z2bar_, layout_.grad_block(j), n).array() += weighted_ * gi;
    }
    block(z2bar_, 0, n) = (s2_.array() * block(a2bar_, 0, n).array() + s2bar_ * q2_.array() +
                           q2bar_ * (6.0 * t2_.array().square() - 2.0) * s2_.array())
                              .matrix();

    grad.b2() = block(z2bar_, 0, n).rowwise().sum();
    grad.w2().noalias() = z2bar_ * a1_.transpose();
    a1bar_.resize(w2.cols(), nb * n);
    a1bar_.noalias() = w2.transpose() * z2bar_;

    // Layer-1 tanh; its input jets are the constant columns of W1.
    z1bar_ = s1_.array() * block(a1bar_, 0, n).array();
    qsum_.setZero(s1_.rows(), n);
    dqsum_.setZero(s1_.rows(), n);
    auto gw1 = grad.w1();
    for (int i = 0; i < d; ++i) {
      const auto abar = block(a1bar_, layout_.grad_block(i), n).array();
      qsum_ += abar.colwise() * w1.col(i).array();
      gw1.col(i) += (abar * s1_.array()).rowwise().sum().matrix();
    }
    for (std::size_t p = 0; p < layout_.pairs.size(); ++p) {
      const auto [i, j] = layout_.pairs[p];
      const auto abar = block(a1bar_, layout_.pair_block(p), n).array();
      const Eigen::ArrayXd wij = w1.col(i).array() * w1.col(j).array();
      dqsum_ += abar.colwise() * wij;
      const Eigen::ArrayXd r = (abar * q1_.array()).rowwise().sum();
      gw1.col(i) += (r * w1.col(j).array()).matrix();
      gw1.col(j) += (r * w1.col(i).array()).matrix();
    }
    z1bar_ += q1_.array() * qsum_ + dqsum_ * (6.0 * t1_.array().square() - 2.0) * s1_.array();

    gw1.noalias() += z1bar_.matrix() * x.transpose();
    grad.b1() = z1bar_.rowwise().sum().matrix();
    return grad;
  }

 private:
  BlockLayout layout_{1, 0};
  MatrixXd z1_, t1_, s1_, q1_, a1_, z2_, t2_, s2_, q2_, a2_;
  Eigen::RowVectorXd out_, obar_;
  MatrixXd a2bar_, z2bar_, a1bar_;
  Eigen::ArrayXXd s2bar_, q2bar_, weighted_, z1bar_, qsum_, dqsum_;
};

JetPass& thread_pass() {
  thread_local JetPass pass;
  return pass;
}

std::ptrdiff_t first_nonfinite(const JetBatch& j) {
  for (Index p = 0; p < j.size(); ++p) {
    if (!std::isfinite(j.value(p)) || !j.gradient.col(p).allFinite() || !j.hessian.col(p).allFinite()) {
      return p;
    }
  }
  return -1;
}

void check_finite_loss(double loss, const JetBatch& jets) {
  if (!std::isfinite(loss)) throw NumericalError("loss is not finite", first_nonfinite(jets));
}

}  // namespace

NetShape shape_from_widths(std::span<const int> widths) {
  if (widths.size() != 4) throw std::invalid_argument("widths must be [d, h1, h2, 1]");
  if (widths[0] < 1 || widths[1] < 1 || widths[2] < 1 || widths[3] != 1) {
    throw std::invalid_argument("widths must be [d, h1, h2, 1] with d, h1, h2 >= 1");
  }
  return NetShape{widths[0], widths[1], widths[2]};
}

MlpParams init_params(const NetShape& shape, std::uint64_t seed) {
  if (shape.input_dim < 1 || shape.hidden1 < 1 || shape.hidden2 < 1) {
    throw std::invalid_argument("network widths must be positive");
  }
  MlpParams params(shape);
  SplitMix64 rng(seed);
  auto fill = [&](auto&& m, int fan_in, int fan_out) {
    const double bound = glorot_bound(fan_in, fan_out);
    for (Index k = 0; k < m.size(); ++k) m.data()[k] = rng.uniform(-bound, bound);
  };
  fill(params.w1(), shape.input_dim, shape.hidden1);
  fill(params.w2(), shape.hidden1, shape.hidden2);
  fill(params.w3(), shape.hidden2, 1);
  return params;
}

JetBatch forward_jets(const MlpParams& params, const Eigen::MatrixXd& points) {
  if (points.rows() != params.shape().input_dim) {
    throw std::invalid_argument("points do not match the network input dimension");
  }
  JetPass& pass = thread_pass();
  pass.forward(params, points);
  return pass.jets();
}

Jet2 forward_jet(const MlpParams& params, const Eigen::VectorXd& x) {
  return forward_jets(params, MatrixXd(x)).jet(0);
}

TrialBatch make_trial_batch(const Domain& domain, PointBatch batch) {
  JetBatch factor = boundary_factor(domain, batch.points);
  return TrialBatch{std::move(batch), std::move(factor)};
}

JetBatch combine_trial(const JetBatch& f, const JetBatch& net) {
  const int d = net.dim();
  const Index n = net.size();
  JetBatch u(d, n);
  for (Index p = 0; p < n; ++p) {
    const double b = f.value(p), v = net.value(p);
    u.value(p) = b * v;
    for (int i = 0; i < d; ++i) u.gradient(i, p) = b * net.gradient(i, p) + v * f.gradient(i, p);
    for (int j = 0; j < d; ++j) {
      for (int i = 0; i < d; ++i) {
        u.hess(i, j, p) = b * net.hess(i, j, p) + f.gradient(i, p) * net.gradient(j, p) +
                          net.gradient(i, p) * f.gradient(j, p) + v * f.hess(i, j, p);
      }
    }
  }
  return u;
}

Jet2 trial_jet(const MlpParams& params, const Domain& domain, const Eigen::VectorXd& x) {
  JetBatch f(domain.dim(), 1);
  f.set(0, boundary_factor(domain, x));
  return combine_trial(f, forward_jets(params, MatrixXd(x))).jet(0);
}

JetBatch trial_jets(const MlpParams& params, const TrialBatch& trial) {
  return combine_trial(trial.factor, forward_jets(params, trial.batch.points));
}

LossAndGradient loss_gradient(const MlpParams& params, const Eigen::MatrixXd& points, const JetLossFn& loss) {
  if (points.cols() < 1) throw std::invalid_argument("loss_gradient needs a nonempty batch");
  JetPass& fwd = thread_pass();
  fwd.forward(params, points);
  const JetBatch jets = fwd.jets();
  JetBatch adj(jets.dim(), jets.size());
  const double value = loss(jets, &adj);
  check_finite_loss(value, jets);
  return {value, fwd.backward(params, points, adj)};
}

LossAndGradient loss_gradient(const MlpParams& params, const TrialBatch& trial, const JetLossFn& loss) {
  const Eigen::MatrixXd& points = trial.batch.points;
  if (points.cols() < 1) throw std::invalid_argument("loss_gradient needs a nonempty batch");
  JetPass& fwd = thread_pass();
  fwd.forward(params, points);
  const JetBatch net = fwd.jets();
  const JetBatch& f = trial.factor;
  const JetBatch u = combine_trial(f, net);
  const int d = u.dim();
  const Index n = u.size();
  JetBatch ubar(d, n);
  const double value = loss(u, &ubar);
  check_finite_loss(value, u);

  // Pull the trial adjoint back through u = B * N.
  JetBatch nbar(d, n);
  for (Index p = 0; p < n; ++p) {
    const double b = f.value(p);
    double vbar = ubar.value(p) * b;
    for (int i = 0; i < d; ++i) {
      vbar += ubar.gradient(i, p) * f.gradient(i, p);
      double gbar = ubar.gradient(i, p) * b;
      for (int j = 0; j < d; ++j) {
        gbar += (ubar.hess(i, j, p) + ubar.hess(j, i, p)) * f.gradient(j, p);
        vbar += ubar.hess(i, j, p) * f.hess(i, j, p);
        nbar.hess(i, j, p) = ubar.hess(i, j, p) * b;
      }
      nbar.gradient(i, p) = gbar;
    }
    nbar.value(p) = vbar;
  }
  return {value, fwd.backward(params, points, nbar)};
}

}  // namespace pinneig
