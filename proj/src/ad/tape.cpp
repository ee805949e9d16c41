#include "tmscm/ad/tape.hpp"

#include <cmath>

#include "tmscm/error.hpp"
#include "tmscm/kernels.hpp"

namespace tmscm::ad {

const Matrix& Var::value() const { return tape->value(id); }

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, false, false, 0, {}, {}});
  return {this, nodes_.size() - 1};
}

Var Tape::variable(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, true, false, 0, {}, {}});
  return {this, nodes_.size() - 1};
}

Var Tape::parameter(Matrix value, std::size_t offset) {
  nodes_.push_back(Node{std::move(value), {}, true, true, offset, {}, {}});
  return {this, nodes_.size() - 1};
}

Var Tape::record(Matrix value, std::vector<std::size_t> inputs, BackwardFn backward) {
  bool needs = false;
  for (std::size_t i : inputs) needs = needs || nodes_[i].requires_grad;
  Node node{std::move(value), {}, needs, false, 0, {}, {}};
  if (needs) {
    node.inputs = std::move(inputs);
    node.backward = std::move(backward);
  }
  nodes_.push_back(std::move(node));
  return {this, nodes_.size() - 1};
}

Matrix Tape::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.grad.empty()) return Matrix(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::accumulate(std::size_t id, const Matrix& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  require(g.same_shape(n.value), ErrorCode::ShapeMismatch, "gradient shape differs from value shape");
  if (n.grad.empty()) {
    n.grad = g;
    return;
  }
  for (std::size_t k = 0; k < g.size(); ++k) n.grad[k] += g[k];
}

void Tape::backward(Var out) {
  require(out.tape == this, ErrorCode::ShapeMismatch, "output belongs to another tape");
  require(value(out).rows() == 1 && value(out).cols() == 1, ErrorCode::NotScalar, "backward needs a 1x1 output");
  for (auto& n : nodes_) n.grad = Matrix();
  if (!nodes_[out.id].requires_grad) return;
  nodes_[out.id].grad = Matrix::scalar(1.0);
  for (std::size_t id = out.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.grad.empty() || !n.backward) continue;
    n.backward(*this, id);
  }
}

Vec Tape::parameter_gradient(std::size_t n) const {
  Vec g(n, 0.0);
  for (const auto& node : nodes_) {
    if (!node.is_parameter || node.grad.empty()) continue;
    require(node.offset + node.grad.size() <= n, ErrorCode::BadRange, "parameter slot exceeds parameter vector");
    for (std::size_t k = 0; k < node.grad.size(); ++k) g[node.offset + k] += node.grad[k];
  }
  return g;
}

namespace {

Tape& same_tape(Var a, Var b) {
  require(a.tape && a.tape == b.tape, ErrorCode::ShapeMismatch, "operands live on different tapes");
  return *a.tape;
}

// Records an elementwise op y = f(x) with dy/dx supplied as a function of (x, y).
template <class Deriv>
Var unary_op(Var a, Matrix y, Deriv deriv) {
  return a.tape->record(std::move(y), {a.id}, [deriv](Tape& t, std::size_t self) {
    const std::size_t in = t.inputs(self)[0];
    const Matrix& x = t.value(in);
    const Matrix& yv = t.value(self);
    const Matrix& g = t.grad_ref(self);
    Matrix d(x.rows(), x.cols());
    for (std::size_t k = 0; k < d.size(); ++k) d[k] = g[k] * deriv(x[k], yv[k]);
    t.accumulate(in, d);
  });
}

}  // namespace

Var linear(Var x, Var w, Var b) {
  Tape& t = same_tape(x, w);
  same_tape(x, b);
  Matrix y = linear(x.value(), w.value(), b.value());
  return t.record(std::move(y), {x.id, w.id, b.id}, [](Tape& t, std::size_t self) {
    const auto& in = t.inputs(self);
    const Matrix& xv = t.value(in[0]);
    const Matrix& wv = t.value(in[1]);
    const Matrix& g = t.grad_ref(self);
    const std::size_t n = xv.rows(), din = xv.cols(), dout = wv.rows();
    if (t.requires_grad(in[0])) {
      Matrix gx(n, din);
      kernels::parallel::matmul_acc(g.data(), n, dout, wv.data(), din, gx.data());
      t.accumulate(in[0], gx);
    }
    if (t.requires_grad(in[1])) {
      Matrix gw(dout, din);
      kernels::parallel::matmul_tn_acc(g.data(), n, dout, xv.data(), din, gw.data());
      t.accumulate(in[1], gw);
    }
    if (t.requires_grad(in[2])) t.accumulate(in[2], reduce_to(g, 1, dout));
  });
}

Var linear(Var x, Var w) {
  Tape& t = same_tape(x, w);
  Matrix y = linear(x.value(), w.value(), Matrix());
  return t.record(std::move(y), {x.id, w.id}, [](Tape& t, std::size_t self) {
    const auto& in = t.inputs(self);
    const Matrix& xv = t.value(in[0]);
    const Matrix& wv = t.value(in[1]);
    const Matrix& g = t.grad_ref(self);
    const std::size_t n = xv.rows(), din = xv.cols(), dout = wv.rows();
    if (t.requires_grad(in[0])) {
      Matrix gx(n, din);
      kernels::parallel::matmul_acc(g.data(), n, dout, wv.data(), din, gx.data());
      t.accumulate(in[0], gx);
    }
    if (t.requires_grad(in[1])) {
      Matrix gw(dout, din);
      kernels::parallel::matmul_tn_acc(g.data(), n, dout, xv.data(), din, gw.data());
      t.accumulate(in[1], gw);
    }
  });
}

Var operator+(Var a, Var b) {
  Tape& t = same_tape(a, b);
  return t.record(a.value() + b.value(), {a.id, b.id}, [](Tape& t, std::size_t self) {
    const auto& in = t.inputs(self);
    const Matrix& g = t.grad_ref(self);
    for (std::size_t i : in)
      if (t.requires_grad(i)) t.accumulate(i, reduce_to(g, t.value(i).rows(), t.value(i).cols()));
  });
}

Var operator-(Var a, Var b) {
  Tape& t = same_tape(a, b);
  return t.record(a.value() - b.value(), {a.id, b.id}, [](Tape& t, std::size_t self) {
    const auto& in = t.inputs(self);
    const Matrix& g = t.grad_ref(self);
    if (t.requires_grad(in[0])) t.accumulate(in[0], reduce_to(g, t.value(in[0]).rows(), t.value(in[0]).cols()));
    if (t.requires_grad(in[1])) t.accumulate(in[1], reduce_to(-g, t.value(in[1]).rows(), t.value(in[1]).cols()));
  });
}

Var operator*(Var a, Var b) {
  Tape& t = same_tape(a, b);
  return t.record(a.value() * b.value(), {a.id, b.id}, [](Tape& t, std::size_t self) {
    const auto& in = t.inputs(self);
    const Matrix& g = t.grad_ref(self);
    const Matrix& av = t.value(in[0]);
    const Matrix& bv = t.value(in[1]);
    if (t.requires_grad(in[0])) t.accumulate(in[0], reduce_to(g * bv, av.rows(), av.cols()));
    if (t.requires_grad(in[1])) t.accumulate(in[1], reduce_to(g * av, bv.rows(), bv.cols()));
  });
}

Var operator/(Var a, Var b) {
  Tape& t = same_tape(a, b);
  return t.record(a.value() / b.value(), {a.id, b.id}, [](Tape& t, std::size_t self) {
    const auto& in = t.inputs(self);
    const Matrix& g = t.grad_ref(self);
    const Matrix& av = t.value(in[0]);
    const Matrix& bv = t.value(in[1]);
    const Matrix gb = g / bv;
    if (t.requires_grad(in[0])) t.accumulate(in[0], reduce_to(gb, av.rows(), av.cols()));
    if (t.requires_grad(in[1])) t.accumulate(in[1], reduce_to(-(gb * t.value(self)), bv.rows(), bv.cols()));
  });
}

Var operator-(Var a) { return a * -1.0; }

Var operator*(Var a, double s) {
  return unary_op(a, a.value() * s, [s](double, double) { return s; });
}
Var operator*(double s, Var a) { return a * s; }
Var operator+(Var a, double s) {
  return unary_op(a, a.value() + s, [](double, double) { return 1.0; });
}
Var operator-(Var a, double s) { return a + (-s); }

Var operator+(Var a, const Matrix& b) { return a + a.tape->constant(b); }
Var operator-(Var a, const Matrix& b) { return a - a.tape->constant(b); }
Var operator*(Var a, const Matrix& b) { return a * a.tape->constant(b); }
Var operator*(const Matrix& a, Var b) { return b.tape->constant(a) * b; }

Var tanh(Var a) {
  return unary_op(a, tanh(a.value()), [](double, double y) { return 1.0 - y * y; });
}
Var sigmoid(Var a) {
  return unary_op(a, sigmoid(a.value()), [](double, double y) { return y * (1.0 - y); });
}
Var exp(Var a) {
  return unary_op(a, exp(a.value()), [](double, double y) { return y; });
}
Var log(Var a) {
  return unary_op(a, log(a.value()), [](double x, double) { return 1.0 / x; });
}
Var softplus(Var a) {
  return unary_op(a, softplus(a.value()), [](double x, double) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  });
}
Var square(Var a) {
  return unary_op(a, square(a.value()), [](double x, double) { return 2.0 * x; });
}

Var sum(Var a) {
  return a.tape->record(sum(a.value()), {a.id}, [](Tape& t, std::size_t self) {
    const std::size_t in = t.inputs(self)[0];
    const Matrix& x = t.value(in);
    t.accumulate(in, Matrix(x.rows(), x.cols(), t.grad_ref(self)[0]));
  });
}

Var mean(Var a) { return sum(a) * (1.0 / static_cast<double>(a.value().size())); }

Var row_sum(Var a) {
  return a.tape->record(row_sum(a.value()), {a.id}, [](Tape& t, std::size_t self) {
    const std::size_t in = t.inputs(self)[0];
    const Matrix& x = t.value(in);
    const Matrix& g = t.grad_ref(self);
    Matrix d(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < x.cols(); ++j) d(i, j) = g[i];
    t.accumulate(in, d);
  });
}

Var logsumexp_rows(Var a) {
  return a.tape->record(logsumexp_rows(a.value()), {a.id}, [](Tape& t, std::size_t self) {
    const std::size_t in = t.inputs(self)[0];
    const Matrix& x = t.value(in);
    const Matrix& y = t.value(self);
    const Matrix& g = t.grad_ref(self);
    Matrix d(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < x.cols(); ++j) d(i, j) = g[i] * std::exp(x(i, j) - y[i]);
    t.accumulate(in, d);
  });
}

Var cols(Var a, std::size_t begin, std::size_t count) {
  return a.tape->record(cols(a.value(), begin, count), {a.id}, [begin](Tape& t, std::size_t self) {
    const std::size_t in = t.inputs(self)[0];
    const Matrix& x = t.value(in);
    const Matrix& g = t.grad_ref(self);
    Matrix d(x.rows(), x.cols());
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) d(i, begin + j) = g(i, j);
    t.accumulate(in, d);
  });
}

Var col(Var a, std::size_t j) { return cols(a, j, 1); }

Var hcat(const std::vector<Var>& parts) {
  require(!parts.empty(), ErrorCode::ShapeMismatch, "hcat of nothing");
  Tape& t = *parts.front().tape;
  std::vector<Matrix> values;
  std::vector<std::size_t> ids;
  for (Var p : parts) {
    same_tape(parts.front(), p);
    values.push_back(p.value());
    ids.push_back(p.id);
  }
  return t.record(hcat(values), ids, [](Tape& t, std::size_t self) {
    const Matrix& g = t.grad_ref(self);
    std::size_t at = 0;
    for (std::size_t id : t.inputs(self)) {
      const std::size_t w = t.value(id).cols();
      if (t.requires_grad(id)) t.accumulate(id, cols(g, at, w));
      at += w;
    }
  });
}

Var diagonal(Var a) {
  return a.tape->record(diagonal(a.value()), {a.id}, [](Tape& t, std::size_t self) {
    const std::size_t in = t.inputs(self)[0];
    const Matrix& g = t.grad_ref(self);
    Matrix d(g.cols(), g.cols());
    for (std::size_t j = 0; j < g.cols(); ++j) d(j, j) = g[j];
    t.accumulate(in, d);
  });
}

Var reshape(Var a, std::size_t rows, std::size_t cols) {
  return a.tape->record(reshape(a.value(), rows, cols), {a.id}, [](Tape& t, std::size_t self) {
    const std::size_t in = t.inputs(self)[0];
    t.accumulate(in, reshape(t.grad_ref(self), t.value(in).rows(), t.value(in).cols()));
  });
}

Matrix PlainParams::get(std::size_t offset, std::size_t rows, std::size_t cols) const {
  require(offset + rows * cols <= theta_->size(), ErrorCode::BadRange, "parameter slot exceeds parameter vector");
  const auto begin = theta_->begin() + static_cast<std::ptrdiff_t>(offset);
  return Matrix(rows, cols, std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(rows * cols)));
}

Var TapeParams::get(std::size_t offset, std::size_t rows, std::size_t cols) const {
  return tape_->parameter(PlainParams(*theta_).get(offset, rows, cols), offset);
}

GradResult grad(const std::function<Var(TapeParams&)>& objective, const Vec& theta) {
  Tape tape;
  TapeParams params(tape, theta);
  Var out = objective(params);
  tape.backward(out);
  return {out.value().item(), tape.parameter_gradient(theta.size())};
}

}  // namespace tmscm::ad
