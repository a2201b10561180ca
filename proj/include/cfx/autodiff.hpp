#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

namespace cfx::ad {

/// Dense row-major n-d array of doubles with an optional gradient buffer.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  /// Throws std::invalid_argument when product(shape) != values.size().
  Tensor(std::vector<std::size_t> shape, std::vector<double> values);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return values_.size(); }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  bool has_grad() const { return !grad_.empty(); }
  std::span<const double> grad() const { return grad_; }
  std::span<double> grad() { return grad_; }
  /// Allocates (or resets) the gradient buffer to zeros.
  void zero_grad() { grad_.assign(values_.size(), 0.0); }
  void drop_grad() { grad_.clear(); }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.values_ == b.values_;
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> values_;
  std::vector<double> grad_;
};

class Tape;

/// Handle to a node recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;
};

/// Single-owner record of a computation for one reverse sweep. A tape can be
/// differentiated once; afterwards it is consumed.
class Tape {
 public:
  /// Receives the tape and the node being differentiated.
  using BackwardFn = std::function<void(Tape&, Var self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Records an input. Leaves with requires_grad receive gradients in backward().
  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  /// Records an operation result. `backward` runs only if the node needs a gradient.
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn backward);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

  /// Reverse sweep from a scalar output. Throws std::logic_error when the
  /// output is not a scalar or the tape was already consumed.
  void backward(Var output);
  bool consumed() const { return consumed_; }

  /// Gradient of the last backward() output with respect to v.
  std::span<const double> grad(Var v) const;

  /// For use inside backward functions.
  std::span<const double> grad_out(Var v) const { return nodes_[v.id].value.grad(); }
  std::span<double> grad_in(Var v) { return nodes_[v.id].value.grad(); }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    bool requires_grad = false;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  bool consumed_ = false;
};

/// Statistics of one batch-norm training forward pass, per channel.
struct BatchMoments {
  std::vector<double> mean;
  std::vector<double> variance;  // biased (divide by N)
  std::size_t count = 0;         // B * T
};

inline constexpr double kBatchNormEps = 1e-5;

// Every op below takes B-leading shapes: sequences are B x C x T, features B x F.

/// Same-length 1-D convolution. kernel: Cout x Cin x K (K odd), bias: Cout. Zero padding K/2.
Var conv1d(Var x, Var kernel, Var bias);

/// Normalizes with the batch's own moments over (B, T); reports them through `moments`.
Var batch_norm_train(Var x, Var gamma, Var beta, BatchMoments* moments);

/// Frozen affine transform with running statistics.
Var batch_norm_infer(Var x, Var gamma, Var beta, std::span<const double> running_mean,
                     std::span<const double> running_var);

/// ReLU; the subgradient at exactly 0 is 0.
Var relu(Var x);

/// Non-overlapping max pooling along time (floor mode). Ties route to the first maximum.
Var max_pool1d(Var x, std::size_t width = 2);

/// B x C x T -> B x C mean over time.
Var global_avg_pool(Var x);

/// Inverted dropout: zeroes with probability `rate` and rescales survivors by 1/(1-rate).
Var dropout(Var x, double rate, std::mt19937_64& rng);

/// x: B x In, weight: Out x In, bias: Out.
Var linear(Var x, Var weight, Var bias);

/// Row-wise softmax of B x C.
Var softmax(Var x);

/// Mean over the batch of -log softmax(logits)[label].
Var softmax_cross_entropy(Var logits, std::span<const std::size_t> labels);

/// Scalar node holding x[flat_index].
Var select(Var x, std::size_t flat_index);

/// Scalar sum of all elements.
Var sum(Var x);

/// Adam with optional L2 weight decay folded into the gradient.
class Adam {
 public:
  struct Options {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.0;
  };

  explicit Adam(Options options) : options_(options) {}

  /// Updates params in place. The i-th call must always pass buffers of the same sizes.
  void step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads);
  /// Single-buffer convenience.
  void step(std::span<double> params, std::span<const double> grad);

  std::size_t steps() const { return t_; }

 private:
  Options options_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace cfx::ad
