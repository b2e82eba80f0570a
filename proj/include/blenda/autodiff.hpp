#pragma once

// Minimal reverse-mode automatic differentiation over dense row-major
// matrices in double precision. A Tape records one forward pass; backward()
// replays it in reverse. A tape and its Vars belong to a single thread.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace blenda::ad {

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> v);

  static Matrix scalar(double v) { return Matrix(1, 1, v); }

  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  std::size_t size() const noexcept { return values.size(); }
  bool same_shape(const Matrix& o) const noexcept { return rows == o.rows && cols == o.cols; }
  bool all_finite() const noexcept;
  std::string shape_string() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

/// Trainable weights living outside any tape. backward() adds into `grad`.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)), grad(value.rows, value.cols) {}
  void zero_grad();
};

struct GrlConfig {
  double scale = 1.0;
  void validate() const;
};

class Tape;

/// Handle to a node on a tape.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  const Matrix& grad() const;
  std::size_t rows() const { return value().rows; }
  std::size_t cols() const { return value().cols; }
  /// Value of a 1x1 node.
  double item() const;
  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  /// Called during backward with the node's own index.
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf without gradient tracking.
  Var constant(Matrix value);
  /// Leaf with a gradient slot.
  Var variable(Matrix value);
  /// Leaf bound to `param`; backward() accumulates into param.grad.
  Var parameter(Parameter& param);

  /// Clears all node gradients, seeds d(root)/d(root) = 1 and propagates to
  /// every node recorded before `root`. Nodes that `root` does not depend on
  /// keep a zero gradient. Throws if root is not 1x1.
  void backward(Var root);
  void zero_grad();

  std::size_t size() const noexcept { return nodes_.size(); }

  // Used by op implementations.
  Var record(Matrix value, std::vector<std::size_t> parents, BackwardFn fn);
  const Matrix& value(std::size_t id) const { return nodes_.at(id).value; }
  const Matrix& grad(std::size_t id) const { return nodes_.at(id).grad; }
  Matrix& grad_mut(std::size_t id) { return nodes_[id].grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
};

// Core ops. Binary elementwise ops broadcast a dimension of size 1.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var relu(Var x);
Var sigmoid(Var x);
Var exp(Var x);
/// Rejects non-positive entries with InvalidArgument.
Var log(Var x);
/// Mean over all entries (1x1).
Var mean(Var x);
/// Sum over all entries (1x1).
Var sum(Var x);
/// Per-row mean (n x 1).
Var row_mean(Var x);
/// Per-column mean (1 x m).
Var col_mean(Var x);
Var transpose(Var x);
Var scale(Var x, double factor);
/// factor - x, elementwise.
Var rsub(double factor, Var x);
/// Clamps into [lo, hi]; gradient passes only where the input is inside.
Var clamp(Var x, double lo, double hi);
/// Row-wise log-softmax.
Var log_softmax(Var x);
/// Gradient reversal: identity forward, adjoint multiplied by -scale backward.
Var grl(Var x, const GrlConfig& cfg = {});

}  // namespace blenda::ad
