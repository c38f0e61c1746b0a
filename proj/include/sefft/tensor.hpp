#pragma once

// Dense [time x channels] tensors and the three layer primitives the
// enhancement network is built from, each with an exact reverse-mode rule.
//
// Everything is templated on the scalar type: float is the working
// precision, double exists for finite-difference gradient checks.
// Backward routines accumulate (+=) into gradient buffers; callers zero them
// between steps.

#include <Eigen/Core>

#include <atomic>
#include <optional>
#include <string>

#include "sefft/errors.hpp"

namespace sefft {

using Index = Eigen::Index;

template <typename Scalar>
using Grid = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

enum class PaddingPolicy { ZeroPad };

/// Which neighbour a dilated tap reads: x[t - d], x[t] or x[t + d].
enum class Tap : int { Past = -1, Present = 0, Future = 1 };

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

/// Time-major value grid with an optional gradient grid of the same shape.
template <typename Scalar>
class Tensor2 {
 public:
  using GridType = Grid<Scalar>;

  Tensor2() = default;

  Tensor2(Index steps, Index channels) : value_(GridType::Zero(checked(steps), checked(channels))) {}

  explicit Tensor2(GridType value) : value_(std::move(value)) {
    checked(value_.rows());
    checked(value_.cols());
  }

  Index steps() const { return value_.rows(); }
  Index channels() const { return value_.cols(); }

  const GridType& value() const { return value_; }
  GridType& value() { return value_; }

  bool has_grad() const { return grad_.has_value(); }

  /// Allocates a zeroed gradient buffer if none exists.
  Tensor2& require_grad() {
    if (!grad_) grad_ = GridType::Zero(value_.rows(), value_.cols());
    return *this;
  }

  void zero_grad() {
    if (grad_) grad_->setZero();
  }

  const GridType& grad() const {
    if (!grad_) throw UsageError("tensor has no gradient buffer");
    return *grad_;
  }
  GridType& grad() {
    if (!grad_) throw UsageError("tensor has no gradient buffer");
    return *grad_;
  }

  template <typename Other>
  Tensor2<Other> cast() const {
    Tensor2<Other> out(value_.template cast<Other>());
    if (grad_) {
      out.require_grad();
      out.grad() = grad_->template cast<Other>();
    }
    return out;
  }

 private:
  static Index checked(Index n) {
    if (n < 1) throw ConfigError("tensor dimensions must be >= 1, got " + std::to_string(n));
    return n;
  }

  GridType value_;
  std::optional<GridType> grad_;
};

/// Per-timestep channel mixing: out[t] = x[t] * weight + bias.
template <typename Scalar>
struct Conv1x1Params {
  Grid<Scalar> weight;          // [in x out]
  RowVector<Scalar> bias;       // [out]
  Grid<Scalar> weight_grad;
  RowVector<Scalar> bias_grad;

  static Conv1x1Params zeros(Index in_channels, Index out_channels) {
    if (in_channels < 1 || out_channels < 1) throw ConfigError("conv1x1 channel counts must be >= 1");
    Conv1x1Params p;
    p.weight = Grid<Scalar>::Zero(in_channels, out_channels);
    p.bias = RowVector<Scalar>::Zero(out_channels);
    p.weight_grad = Grid<Scalar>::Zero(in_channels, out_channels);
    p.bias_grad = RowVector<Scalar>::Zero(out_channels);
    return p;
  }

  Index in_channels() const { return weight.rows(); }
  Index out_channels() const { return weight.cols(); }
  Index size() const { return weight.size() + bias.size(); }

  void zero_grad() {
    weight_grad.setZero();
    bias_grad.setZero();
  }

  void check() const {
    if (bias.size() != weight.cols() || weight_grad.rows() != weight.rows() ||
        weight_grad.cols() != weight.cols() || bias_grad.size() != bias.size())
      throw ConfigError("conv1x1 parameter shapes are inconsistent");
  }

  template <typename Other>
  Conv1x1Params<Other> cast() const {
    return {weight.template cast<Other>(), bias.template cast<Other>(),
            weight_grad.template cast<Other>(), bias_grad.template cast<Other>()};
  }
};

/// out[t] = src[t + delta] where in range, zero elsewhere.
template <typename Derived>
Grid<typename Derived::Scalar> shift_rows(const Eigen::MatrixBase<Derived>& src, Index delta) {
  using Scalar = typename Derived::Scalar;
  const Index steps = src.rows();
  Grid<Scalar> out = Grid<Scalar>::Zero(steps, src.cols());
  const Index span = steps - (delta < 0 ? -delta : delta);
  if (span <= 0) return out;
  if (delta >= 0)
    out.topRows(span) = src.bottomRows(span);
  else
    out.bottomRows(span) = src.topRows(span);
  return out;
}

template <typename Scalar>
Tensor2<Scalar> conv1x1_forward(const Tensor2<Scalar>& x, const Conv1x1Params<Scalar>& p) {
  p.check();
  if (x.channels() != p.in_channels())
    throw ConfigError("conv1x1: input has " + std::to_string(x.channels()) + " channels, weight expects " +
                      std::to_string(p.in_channels()));
  Grid<Scalar> out = x.value() * p.weight;
  out.rowwise() += p.bias;
  return Tensor2<Scalar>(std::move(out));
}

/// Accumulates dL/dx, dL/dweight and dL/dbias given dL/dout.
template <typename Scalar>
void conv1x1_backward(const Grid<Scalar>& upstream, Tensor2<Scalar>& x, Conv1x1Params<Scalar>& p) {
  if (upstream.rows() != x.steps() || upstream.cols() != p.out_channels())
    throw UsageError("conv1x1_backward: upstream gradient shape does not match the forward output");
  auto& x_grad = x.grad();
  p.weight_grad.noalias() += x.value().transpose() * upstream;
  p.bias_grad += upstream.colwise().sum();
  x_grad.noalias() += upstream * p.weight.transpose();
}

template <typename Scalar>
Tensor2<Scalar> dilated_tap_gather(const Tensor2<Scalar>& x, Index dilation, Tap offset,
                                   PaddingPolicy = PaddingPolicy::ZeroPad) {
  if (dilation < 1) throw ConfigError("dilation must be >= 1");
  return Tensor2<Scalar>(shift_rows(x.value(), static_cast<int>(offset) * dilation));
}

/// Transpose of the gather: x.grad[t + offset*d] += upstream[t].
template <typename Scalar>
void tap_gather_backward(const Grid<Scalar>& upstream, Tensor2<Scalar>& x, Index dilation, Tap offset,
                         PaddingPolicy = PaddingPolicy::ZeroPad) {
  if (dilation < 1) throw ConfigError("dilation must be >= 1");
  if (upstream.rows() != x.steps() || upstream.cols() != x.channels())
    throw UsageError("tap_gather_backward: upstream gradient shape does not match the forward output");
  auto& x_grad = x.grad();
  const Index delta = static_cast<int>(offset) * dilation;
  const Index span = x.steps() - (delta < 0 ? -delta : delta);
  if (span <= 0) return;
  if (delta >= 0)
    x_grad.bottomRows(span) += upstream.topRows(span);
  else
    x_grad.topRows(span) += upstream.bottomRows(span);
}

template <typename Scalar>
Tensor2<Scalar> relu_forward(const Tensor2<Scalar>& x) {
  return Tensor2<Scalar>(Grid<Scalar>(x.value().cwiseMax(Scalar(0))));
}

namespace testing {
// Negative-control hook for gradient checking: when set, relu_backward
// forgets its mask and passes the upstream gradient through unchanged.
inline std::atomic<bool>& relu_backward_fault() {
  static std::atomic<bool> flag{false};
  return flag;
}
}  // namespace testing

/// Derivative at exactly 0 is taken as 0.
template <typename Scalar>
void relu_backward(const Grid<Scalar>& upstream, Tensor2<Scalar>& x) {
  if (upstream.rows() != x.steps() || upstream.cols() != x.channels())
    throw UsageError("relu_backward: upstream gradient shape does not match the forward output");
  auto& x_grad = x.grad();
  if (testing::relu_backward_fault().load(std::memory_order_relaxed)) {
    x_grad += upstream;
    return;
  }
  x_grad.array() += (x.value().array() > Scalar(0)).select(upstream.array(), Scalar(0));
}

}  // namespace sefft
