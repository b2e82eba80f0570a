#include "blenda/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "blenda/error.hpp"
#include "blenda/kernels.hpp"

namespace blenda::ad {

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> v)
    : rows(r), cols(c), values(std::move(v)) {
  if (values.size() != rows * cols) {
    throw ShapeError("matrix data length does not match " + shape_string());
  }
}

bool Matrix::all_finite() const noexcept {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

std::string Matrix::shape_string() const {
  return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
}

void Parameter::zero_grad() { std::fill(grad.values.begin(), grad.values.end(), 0.0); }

void GrlConfig::validate() const {
  if (!std::isfinite(scale) || scale <= 0.0) {
    throw InvalidArgument("GRL scale must be finite and > 0");
  }
}

const Matrix& Var::value() const { return tape_->value(id_); }
const Matrix& Var::grad() const { return tape_->grad(id_); }

double Var::item() const {
  const Matrix& v = value();
  if (v.rows != 1 || v.cols != 1) {
    throw ShapeError("item() needs a 1x1 value, got " + v.shape_string());
  }
  return v.values[0];
}

// ---------------------------------------------------------------- tape

Var Tape::constant(Matrix value) {
  Node n;
  n.grad = Matrix(value.rows, value.cols);
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Matrix value) {
  Var v = constant(std::move(value));
  nodes_.back().requires_grad = true;
  return v;
}

Var Tape::parameter(Parameter& param) {
  Var v = variable(param.value);
  nodes_.back().param = &param;
  return v;
}

Var Tape::record(Matrix value, std::vector<std::size_t> parents, BackwardFn fn) {
  Node n;
  n.grad = Matrix(value.rows, value.cols);
  n.value = std::move(value);
  n.requires_grad = std::any_of(parents.begin(), parents.end(),
                                [this](std::size_t p) { return nodes_[p].requires_grad; });
  n.parents = std::move(parents);
  if (n.requires_grad) {
    n.backward = std::move(fn);
  }
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

void Tape::zero_grad() {
  for (auto& n : nodes_) {
    std::fill(n.grad.values.begin(), n.grad.values.end(), 0.0);
  }
}

void Tape::backward(Var root) {
  if (root.tape() != this) {
    throw InvalidArgument("backward root belongs to another tape");
  }
  if (value(root.id()).size() != 1) {
    throw ShapeError("backward needs a scalar root, got " + value(root.id()).shape_string());
  }
  zero_grad();
  nodes_[root.id()].grad.values[0] = 1.0;
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backward) {
      n.backward(*this, i);
    }
  }
  for (std::size_t i = 0; i <= root.id(); ++i) {
    Node& n = nodes_[i];
    if (n.param != nullptr) {
      auto& pg = n.param->grad.values;
      for (std::size_t k = 0; k < pg.size(); ++k) {
        pg[k] += n.grad.values[k];
      }
    }
  }
}

// ---------------------------------------------------------------- helpers

namespace {

Tape& same_tape(Var a, Var b) {
  if (!a.valid() || !b.valid() || a.tape() != b.tape()) {
    throw InvalidArgument("operands must live on the same tape");
  }
  return *a.tape();
}

Tape& tape_of(Var a) {
  if (!a.valid()) {
    throw InvalidArgument("operation on an empty Var");
  }
  return *a.tape();
}

std::size_t broadcast_dim(std::size_t a, std::size_t b, const Matrix& x, const Matrix& y,
                          const char* op) {
  if (a == b || b == 1) return a;
  if (a == 1) return b;
  throw ShapeError(std::string(op) + ": incompatible shapes " + x.shape_string() + " and " +
                   y.shape_string());
}

// Adds `g` (out-shaped) into `target`, summing over broadcast dimensions.
void reduce_into(const Matrix& g, Matrix& target) {
  for (std::size_t r = 0; r < g.rows; ++r) {
    const std::size_t tr = target.rows == 1 ? 0 : r;
    for (std::size_t c = 0; c < g.cols; ++c) {
      const std::size_t tc = target.cols == 1 ? 0 : c;
      target(tr, tc) += g(r, c);
    }
  }
}

template <typename F>
Matrix broadcast_apply(const Matrix& a, const Matrix& b, const char* op, F f) {
  Matrix out(broadcast_dim(a.rows, b.rows, a, b, op), broadcast_dim(a.cols, b.cols, a, b, op));
  for (std::size_t r = 0; r < out.rows; ++r) {
    for (std::size_t c = 0; c < out.cols; ++c) {
      out(r, c) = f(a(a.rows == 1 ? 0 : r, a.cols == 1 ? 0 : c),
                    b(b.rows == 1 ? 0 : r, b.cols == 1 ? 0 : c));
    }
  }
  return out;
}

template <typename F, typename D>
Var unary(Var x, F forward, D derivative) {
  Tape& t = tape_of(x);
  const Matrix& xv = x.value();
  Matrix out(xv.rows, xv.cols);
  for (std::size_t i = 0; i < xv.size(); ++i) {
    out.values[i] = forward(xv.values[i]);
  }
  const std::size_t xi = x.id();
  return t.record(std::move(out), {xi}, [xi, derivative](Tape& tp, std::size_t self) {
    if (!tp.requires_grad(xi)) return;
    const Matrix& g = tp.grad(self);
    const Matrix& in = tp.value(xi);
    const Matrix& o = tp.value(self);
    Matrix& gx = tp.grad_mut(xi);
    for (std::size_t i = 0; i < g.size(); ++i) {
      gx.values[i] += g.values[i] * derivative(in.values[i], o.values[i]);
    }
  });
}

}  // namespace

// ---------------------------------------------------------------- ops

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols != bv.rows) {
    throw ShapeError("matmul: " + av.shape_string() + " x " + bv.shape_string());
  }
  const std::size_t m = av.rows, k = av.cols, n = bv.cols;
  Matrix out(m, n);
  kernels::parallel::matmul(av.values, bv.values, out.values, m, k, n);
  const std::size_t ai = a.id(), bi = b.id();
  return t.record(std::move(out), {ai, bi}, [ai, bi, m, k, n](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    if (tp.requires_grad(ai)) {
      kernels::parallel::matmul_a_bt_acc(g.values, tp.value(bi).values, tp.grad_mut(ai).values, m,
                                         k, n);
    }
    if (tp.requires_grad(bi)) {
      kernels::parallel::matmul_at_b_acc(tp.value(ai).values, g.values, tp.grad_mut(bi).values, m,
                                         k, n);
    }
  });
}

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b);
  Matrix out = broadcast_apply(a.value(), b.value(), "add", [](double x, double y) { return x + y; });
  const std::size_t ai = a.id(), bi = b.id();
  return t.record(std::move(out), {ai, bi}, [ai, bi](Tape& tp, std::size_t self) {
    if (tp.requires_grad(ai)) reduce_into(tp.grad(self), tp.grad_mut(ai));
    if (tp.requires_grad(bi)) reduce_into(tp.grad(self), tp.grad_mut(bi));
  });
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b);
  Matrix out = broadcast_apply(a.value(), b.value(), "sub", [](double x, double y) { return x - y; });
  const std::size_t ai = a.id(), bi = b.id();
  return t.record(std::move(out), {ai, bi}, [ai, bi](Tape& tp, std::size_t self) {
    if (tp.requires_grad(ai)) reduce_into(tp.grad(self), tp.grad_mut(ai));
    if (tp.requires_grad(bi)) {
      Matrix neg = tp.grad(self);
      for (auto& v : neg.values) v = -v;
      reduce_into(neg, tp.grad_mut(bi));
    }
  });
}

Var mul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  Matrix out = broadcast_apply(a.value(), b.value(), "mul", [](double x, double y) { return x * y; });
  const std::size_t ai = a.id(), bi = b.id();
  return t.record(std::move(out), {ai, bi}, [ai, bi](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    if (tp.requires_grad(ai)) {
      reduce_into(broadcast_apply(g, tp.value(bi), "mul", [](double x, double y) { return x * y; }),
                  tp.grad_mut(ai));
    }
    if (tp.requires_grad(bi)) {
      reduce_into(broadcast_apply(g, tp.value(ai), "mul", [](double x, double y) { return x * y; }),
                  tp.grad_mut(bi));
    }
  });
}

Var relu(Var x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double in, double) { return in > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(Var x) {
  return unary(
      x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double out) { return out * (1.0 - out); });
}

Var exp(Var x) {
  return unary(x, [](double v) { return std::exp(v); }, [](double, double out) { return out; });
}

Var log(Var x) {
  for (double v : x.value().values) {
    if (!(v > 0.0)) {
      throw InvalidArgument("log of non-positive value " + std::to_string(v));
    }
  }
  return unary(x, [](double v) { return std::log(v); }, [](double in, double) { return 1.0 / in; });
}

Var scale(Var x, double factor) {
  return unary(x, [factor](double v) { return factor * v; },
               [factor](double, double) { return factor; });
}

Var rsub(double factor, Var x) {
  return unary(x, [factor](double v) { return factor - v; }, [](double, double) { return -1.0; });
}

Var clamp(Var x, double lo, double hi) {
  if (!(lo <= hi)) {
    throw InvalidArgument("clamp bounds out of order");
  }
  return unary(
      x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double in, double) { return (in >= lo && in <= hi) ? 1.0 : 0.0; });
}

Var grl(Var x, const GrlConfig& cfg) {
  cfg.validate();
  const double factor = -cfg.scale;
  return unary(x, [](double v) { return v; }, [factor](double, double) { return factor; });
}

Var sum(Var x) {
  Tape& t = tape_of(x);
  double s = 0.0;
  for (double v : x.value().values) s += v;
  const std::size_t xi = x.id();
  return t.record(Matrix::scalar(s), {xi}, [xi](Tape& tp, std::size_t self) {
    if (!tp.requires_grad(xi)) return;
    const double g = tp.grad(self).values[0];
    for (auto& v : tp.grad_mut(xi).values) v += g;
  });
}

Var mean(Var x) {
  Tape& t = tape_of(x);
  const std::size_t n = x.value().size();
  if (n == 0) {
    throw ShapeError("mean of an empty tensor");
  }
  double s = 0.0;
  for (double v : x.value().values) s += v;
  const std::size_t xi = x.id();
  return t.record(Matrix::scalar(s / static_cast<double>(n)), {xi},
                  [xi, n](Tape& tp, std::size_t self) {
                    if (!tp.requires_grad(xi)) return;
                    const double g = tp.grad(self).values[0] / static_cast<double>(n);
                    for (auto& v : tp.grad_mut(xi).values) v += g;
                  });
}

Var row_mean(Var x) {
  Tape& t = tape_of(x);
  const Matrix& xv = x.value();
  if (xv.cols == 0) throw ShapeError("row_mean of a tensor without columns");
  Matrix out(xv.rows, 1);
  for (std::size_t r = 0; r < xv.rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < xv.cols; ++c) s += xv(r, c);
    out(r, 0) = s / static_cast<double>(xv.cols);
  }
  const std::size_t xi = x.id();
  return t.record(std::move(out), {xi}, [xi](Tape& tp, std::size_t self) {
    if (!tp.requires_grad(xi)) return;
    Matrix& gx = tp.grad_mut(xi);
    const Matrix& g = tp.grad(self);
    const double inv = 1.0 / static_cast<double>(gx.cols);
    for (std::size_t r = 0; r < gx.rows; ++r)
      for (std::size_t c = 0; c < gx.cols; ++c) gx(r, c) += g(r, 0) * inv;
  });
}

Var col_mean(Var x) {
  Tape& t = tape_of(x);
  const Matrix& xv = x.value();
  if (xv.rows == 0) throw ShapeError("col_mean of a tensor without rows");
  Matrix out(1, xv.cols);
  for (std::size_t r = 0; r < xv.rows; ++r)
    for (std::size_t c = 0; c < xv.cols; ++c) out(0, c) += xv(r, c);
  for (auto& v : out.values) v /= static_cast<double>(xv.rows);
  const std::size_t xi = x.id();
  return t.record(std::move(out), {xi}, [xi](Tape& tp, std::size_t self) {
    if (!tp.requires_grad(xi)) return;
    Matrix& gx = tp.grad_mut(xi);
    const Matrix& g = tp.grad(self);
    const double inv = 1.0 / static_cast<double>(gx.rows);
    for (std::size_t r = 0; r < gx.rows; ++r)
      for (std::size_t c = 0; c < gx.cols; ++c) gx(r, c) += g(0, c) * inv;
  });
}

Var transpose(Var x) {
  Tape& t = tape_of(x);
  const Matrix& xv = x.value();
  Matrix out(xv.cols, xv.rows);
  for (std::size_t r = 0; r < xv.rows; ++r)
    for (std::size_t c = 0; c < xv.cols; ++c) out(c, r) = xv(r, c);
  const std::size_t xi = x.id();
  return t.record(std::move(out), {xi}, [xi](Tape& tp, std::size_t self) {
    if (!tp.requires_grad(xi)) return;
    Matrix& gx = tp.grad_mut(xi);
    const Matrix& g = tp.grad(self);
    for (std::size_t r = 0; r < gx.rows; ++r)
      for (std::size_t c = 0; c < gx.cols; ++c) gx(r, c) += g(c, r);
  });
}

Var log_softmax(Var x) {
  Tape& t = tape_of(x);
  const Matrix& xv = x.value();
  Matrix out(xv.rows, xv.cols);
  for (std::size_t r = 0; r < xv.rows; ++r) {
    double mx = xv(r, 0);
    for (std::size_t c = 1; c < xv.cols; ++c) mx = std::max(mx, xv(r, c));
    double s = 0.0;
    for (std::size_t c = 0; c < xv.cols; ++c) s += std::exp(xv(r, c) - mx);
    const double lse = mx + std::log(s);
    for (std::size_t c = 0; c < xv.cols; ++c) out(r, c) = xv(r, c) - lse;
  }
  const std::size_t xi = x.id();
  return t.record(std::move(out), {xi}, [xi](Tape& tp, std::size_t self) {
    if (!tp.requires_grad(xi)) return;
    const Matrix& g = tp.grad(self);
    const Matrix& o = tp.value(self);
    Matrix& gx = tp.grad_mut(xi);
    for (std::size_t r = 0; r < g.rows; ++r) {
      double gs = 0.0;
      for (std::size_t c = 0; c < g.cols; ++c) gs += g(r, c);
      for (std::size_t c = 0; c < g.cols; ++c) gx(r, c) += g(r, c) - std::exp(o(r, c)) * gs;
    }
  });
}

}  // namespace blenda::ad
