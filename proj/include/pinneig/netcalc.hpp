#pragma once

#include <array>
#include <cstdint>
#include <functional>

#include <Eigen/Dense>

#include "pinneig/geometry.hpp"
#include "pinneig/jet.hpp"

namespace pinneig {

/// Layer widths [d, h1, h2, 1] of the two-hidden-layer tanh network.
struct NetShape {
  int input_dim = 2;
  int hidden1 = 32;
  int hidden2 = 32;

  Eigen::Index parameter_count() const {
    return Eigen::Index(hidden1) * input_dim + hidden1 + Eigen::Index(hidden2) * hidden1 + hidden2 +
           hidden2 + 1;
  }
  std::array<int, 4> widths() const { return {input_dim, hidden1, hidden2, 1}; }
  bool operator==(const NetShape&) const = default;
};

/// Validates [d, h1, h2, 1]; throws std::invalid_argument otherwise.
NetShape shape_from_widths(std::span<const int> widths);

// Flat parameter vector with named per-layer views. Layout:
// W1 (h1 x d, column-major), b1, W2 (h2 x h1, column-major), b2, w3 (h2), b3.
template <class Tag>
class LayeredVector {
 public:
  using MatMap = Eigen::Map<Eigen::MatrixXd>;
  using ConstMatMap = Eigen::Map<const Eigen::MatrixXd>;
  using VecMap = Eigen::Map<Eigen::VectorXd>;
  using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

  LayeredVector() = default;
  explicit LayeredVector(NetShape shape)
      : shape_(shape), flat_(Eigen::VectorXd::Zero(shape.parameter_count())) {}
  LayeredVector(NetShape shape, Eigen::VectorXd flat) : shape_(shape), flat_(std::move(flat)) {
    if (flat_.size() != shape_.parameter_count()) {
      throw std::invalid_argument("flat parameter vector does not match network shape");
    }
  }

  const NetShape& shape() const { return shape_; }
  const Eigen::VectorXd& flat() const { return flat_; }
  Eigen::VectorXd& flat() { return flat_; }

  MatMap w1() { return {flat_.data() + off_w1(), shape_.hidden1, shape_.input_dim}; }
  VecMap b1() { return {flat_.data() + off_b1(), shape_.hidden1}; }
  MatMap w2() { return {flat_.data() + off_w2(), shape_.hidden2, shape_.hidden1}; }
  VecMap b2() { return {flat_.data() + off_b2(), shape_.hidden2}; }
  VecMap w3() { return {flat_.data() + off_w3(), shape_.hidden2}; }
  double& b3() { return flat_[off_b3()]; }

  ConstMatMap w1() const { return {flat_.data() + off_w1(), shape_.hidden1, shape_.input_dim}; }
  ConstVecMap b1() const { return {flat_.data() + off_b1(), shape_.hidden1}; }
  ConstMatMap w2() const { return {flat_.data() + off_w2(), shape_.hidden2, shape_.hidden1}; }
  ConstVecMap b2() const { return {flat_.data() + off_b2(), shape_.hidden2}; }
  ConstVecMap w3() const { return {flat_.data() + off_w3(), shape_.hidden2}; }
  double b3() const { return flat_[off_b3()]; }

  bool operator==(const LayeredVector& o) const { return shape_ == o.shape_ && flat_ == o.flat_; }

 private:
  Eigen::Index off_w1() const { return 0; }
  Eigen::Index off_b1() const { return off_w1() + Eigen::Index(shape_.hidden1) * shape_.input_dim; }
  Eigen::Index off_w2() const { return off_b1() + shape_.hidden1; }
  Eigen::Index off_b2() const { return off_w2() + Eigen::Index(shape_.hidden2) * shape_.hidden1; }
  Eigen::Index off_w3() const { return off_b2() + shape_.hidden2; }
  Eigen::Index off_b3() const { return off_w3() + shape_.hidden2; }

  NetShape shape_;
  Eigen::VectorXd flat_;
};

struct ParamsTag {};
struct GradientTag {};
using MlpParams = LayeredVector<ParamsTag>;
using ParamGradient = LayeredVector<GradientTag>;

/// Glorot-uniform weights, zero biases; deterministic given the seed.
MlpParams init_params(const NetShape& shape, std::uint64_t seed);

/// Half-width of the Glorot-uniform interval for a layer.
inline double glorot_bound(int fan_in, int fan_out) { return std::sqrt(6.0 / (fan_in + fan_out)); }

/// Exact network jets for a batch of points (one column per point).
JetBatch forward_jets(const MlpParams& params, const Eigen::MatrixXd& points);

/// Exact network jet at a single point.
Jet2 forward_jet(const MlpParams& params, const Eigen::VectorXd& x);

/// Collocation batch with the boundary factor's jets cached, so the trial
/// function u = B * N can be evaluated repeatedly without recomputing B.
struct TrialBatch {
  PointBatch batch;
  JetBatch factor;

  Eigen::Index size() const { return batch.size(); }
};

TrialBatch make_trial_batch(const Domain& domain, PointBatch batch);

/// Jet of u = B * N at a single point, by the second-order product rule.
Jet2 trial_jet(const MlpParams& params, const Domain& domain, const Eigen::VectorXd& x);

/// Trial jets u = B * N on a cached batch.
JetBatch trial_jets(const MlpParams& params, const TrialBatch& trial);

/// Product-rule combination of factor and network jets.
JetBatch combine_trial(const JetBatch& factor, const JetBatch& net);

// A scalar loss of per-point jets. Returns the loss; when `adjoint` is
// non-null it must be filled with dLoss/d(value, gradient, Hessian entry)
// for every point, same layout as the input.
using JetLossFn = std::function<double(const JetBatch& jets, JetBatch* adjoint)>;

struct LossAndGradient {
  double loss = 0.0;
  ParamGradient gradient;
};

/// Loss of the raw network jets and its exact parameter gradient.
/// Throws NumericalError if the loss is not finite.
LossAndGradient loss_gradient(const MlpParams& params, const Eigen::MatrixXd& points,
                              const JetLossFn& loss);

/// Loss of the trial jets u = B * N and its exact parameter gradient.
LossAndGradient loss_gradient(const MlpParams& params, const TrialBatch& trial, const JetLossFn& loss);

}  // namespace pinneig
