#pragma once

// Reverse-mode differentiation over the small operator set the generator
// network needs. A Tape records each executed op together with a closure
// that pushes the output gradient back to the op's inputs.

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "dspr/tensor.hpp"

namespace dspr {

/// Handle to a node on a Tape.
struct Var {
  std::size_t id = 0;
};

template <typename Scalar>
class Tape {
 public:
  using TensorT = Tensor4<Scalar>;
  using BackwardFn = std::function<void(Tape&, Var self)>;

  Var leaf(TensorT value, bool requires_grad = false);

  /// Appends an op result. `requires_grad` is normally the OR over its inputs.
  Var record(TensorT value, bool requires_grad, BackwardFn backward);

  const TensorT& value(Var v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  bool has_grad(Var v) const { return !nodes_.at(v.id).grad.empty(); }

  /// Gradient of the last backward() target w.r.t. v; zeros if none reached v.
  TensorT grad(Var v) const;

  /// Mutable gradient buffer, zero-initialized on first access.
  TensorT& grad_buffer(Var v);

  /// Seeds d(loss)/d(loss) = 1 and runs every recorded closure in reverse order.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

  /// When enabled, leaky_relu appends the sign pattern of its input so that
  /// finite-difference checks can detect evaluations that straddle a kink.
  void set_record_kinks(bool on) { record_kinks_ = on; }
  bool record_kinks() const { return record_kinks_; }
  std::vector<bool>& kink_pattern() { return kinks_; }
  const std::vector<bool>& kink_pattern() const { return kinks_; }

 private:
  struct Node {
    TensorT value;
    TensorT grad;
    bool requires_grad = false;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  bool record_kinks_ = false;
  std::vector<bool> kinks_;
};

// ---------------------------------------------------------------------------
// Operators. Each returns a new node on the same tape.

/// 2D cross-correlation with zero padding (k-1)/2 for square kernels of size
/// k in {1, 3}. weight is (out_c, in_c, k, k); bias is (1, out_c, 1, 1) or absent.
template <typename Scalar>
Var conv2d(Tape<Scalar>& tape, Var x, Var weight, std::optional<Var> bias, int stride);

/// Training-mode batch normalization; statistics per channel over (n, h, w).
/// gamma and beta have shape (1, c, 1, 1).
template <typename Scalar>
Var batch_norm(Tape<Scalar>& tape, Var x, Var gamma, Var beta, Scalar eps = Scalar(1e-5));

template <typename Scalar>
Var leaky_relu(Tape<Scalar>& tape, Var x, Scalar alpha);

/// Bilinear 2x upsampling, half-pixel (align-corners false) convention with
/// edge clamping.
template <typename Scalar>
Var upsample_bilinear2x(Tape<Scalar>& tape, Var x);

template <typename Scalar>
Var add(Tape<Scalar>& tape, Var x, Var y);

/// Elementwise product.
template <typename Scalar>
Var mul(Tape<Scalar>& tape, Var x, Var y);

template <typename Scalar>
Var scale(Tape<Scalar>& tape, Var x, Scalar factor);

template <typename Scalar>
Var sigmoid(Tape<Scalar>& tape, Var x);

/// Sum of all entries, as a (1,1,1,1) tensor.
template <typename Scalar>
Var sum(Tape<Scalar>& tape, Var x);

/// Top-left h x w window of every channel.
template <typename Scalar>
Var crop(Tape<Scalar>& tape, Var x, Index h, Index w);

/// sum(mask * (pred - target)^2) / sum(mask). target and mask are constants.
template <typename Scalar>
Var masked_mse(Tape<Scalar>& tape, Var pred, const Tensor4<Scalar>& target,
               const Tensor4<Scalar>& mask01);

// Plain (tape-free) helpers shared with the operators.

template <typename Scalar>
Tensor4<Scalar> upsample_bilinear2x(const Tensor4<Scalar>& x);

/// Zero-pads the bottom/right of every channel to (h, w).
template <typename Scalar>
Tensor4<Scalar> pad_bottom_right(const Tensor4<Scalar>& x, Index h, Index w);

}  // namespace dspr
