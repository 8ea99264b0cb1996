#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "mwa/matrix.hpp"

namespace mwa {

/// Trainable matrix with a gradient accumulator of the same shape.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Matrix value, bool decay = true)
      : name(std::move(name)), value(std::move(value)), decay(decay) {
    grad = Matrix::zeros(this->value.rows(), this->value.cols());
  }

  std::string name;
  Matrix value;
  Matrix grad;
  /// Whether decoupled weight decay applies to this parameter.
  bool decay = true;

  void zero_grad() { grad = Matrix::zeros(value.rows(), value.cols()); }
};

void zero_grads(std::span<Parameter* const> params);

/// Handle to a node recorded on a Tape.
struct Var {
  static constexpr std::size_t kInvalid = std::numeric_limits<std::size_t>::max();
  std::size_t index = kInvalid;
  bool valid() const noexcept { return index != kInvalid; }
};

/// Records a forward pass and replays explicit per-operation backward rules
/// in reverse order. A tape is single use: build, backward, discard.
class Tape {
 public:
  /// Receives the upstream gradient of the node and one accumulator per input,
  /// in the order the inputs were recorded.
  using BackwardFn = std::function<void(const Matrix& grad_out, std::span<Matrix* const> grad_in)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf bound to a Parameter; backward adds its gradient into p.grad.
  Var parameter(Parameter& p);
  /// Leaf without gradient.
  Var constant(Matrix value);

  /// Registers a custom operation. Modules outside numerics use this to add
  /// their own differentiable kernels.
  Var record(Matrix value, std::vector<Var> inputs, BackwardFn backward);

  const Matrix& value(Var v) const;
  const Matrix& grad(Var v) const;
  std::size_t size() const noexcept { return nodes_.size(); }

  Var matmul(Var a, Var b);
  /// a * b^T
  Var matmul_nt(Var a, Var b);
  Var add(Var a, Var b);
  /// Adds a 1 x c row to every row of a.
  Var add_row(Var a, Var row);
  Var scale(Var a, double s);
  Var softmax_rows(Var a);
  Var tanh(Var a);
  Var logistic(Var a);
  Var concat_columns(std::span<const Var> parts);
  /// Selects rows of table by index (embedding lookup).
  Var gather_rows(Var table, std::vector<std::size_t> ids);
  /// Column means: n x d -> 1 x d.
  Var mean_rows(Var a);
  Var sum(Var a);
  /// Softmax cross-entropy of a 1 x C logit row against a class label.
  /// With `excess` the value is reduced by ln C (zero for uniform logits),
  /// evaluated through expm1/log1p; full relative precision near that point.
  /// The gradient is the same either way.
  Var cross_entropy(Var logits, std::size_t label, bool excess = false);

  /// Propagates d(loss)/d(node) for a 1x1 loss and accumulates into every
  /// bound Parameter. Calling it twice accumulates twice.
  void backward(Var loss);

  /// Smallest gap between the winning row and the runner-up over all
  /// max-pooling reductions recorded so far (infinity if none).
  double max_pool_margin() const noexcept { return max_pool_margin_; }
  void note_max_pool_margin(double gap) noexcept {
    if (gap < max_pool_margin_) max_pool_margin_ = gap;
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::vector<Var> inputs;
    BackwardFn backward;
    Parameter* param = nullptr;
  };

  const Node& node(Var v) const;

  std::vector<Node> nodes_;
  double max_pool_margin_ = std::numeric_limits<double>::infinity();
};

namespace testing {
/// Negative-control hook: when set, matmul backward scales the gradient of its
/// left operand by 1.01. Never enabled outside tests and the gradcheck CLI.
void set_corrupt_backward(bool enabled);
bool corrupt_backward();
}  // namespace testing

}  // namespace mwa
