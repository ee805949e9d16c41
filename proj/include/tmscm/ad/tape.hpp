#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "tmscm/ad/matrix.hpp"
#include "tmscm/rng.hpp"

namespace tmscm::ad {

class Tape;

/// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

/// Append-only record of matrix operations, replayed backwards by `backward`.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Var constant(Matrix value);
  Var variable(Matrix value);
  /// Leaf whose gradient is scattered into θ[offset, offset + size).
  Var parameter(Matrix value, std::size_t offset);

  Var record(Matrix value, std::vector<std::size_t> inputs, BackwardFn backward);

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  /// Gradient of the last `backward` output; zeros if the node was not reached.
  Matrix grad(Var v) const;
  const Matrix& grad_ref(std::size_t id) const { return nodes_[id].grad; }
  const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_[id].inputs; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  void accumulate(std::size_t id, const Matrix& g);

  /// Reverse sweep from a 1×1 output.
  void backward(Var out);
  /// Collects parameter gradients into a flat vector of length n.
  Vec parameter_gradient(std::size_t n) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    bool is_parameter = false;
    std::size_t offset = 0;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

Var linear(Var x, Var w, Var b);
Var linear(Var x, Var w);
Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator/(Var a, Var b);
Var operator-(Var a);
Var operator*(Var a, double s);
Var operator*(double s, Var a);
Var operator+(Var a, double s);
Var operator-(Var a, double s);
// Mixed forms lift the matrix to a constant on a's tape.
Var operator+(Var a, const Matrix& b);
Var operator-(Var a, const Matrix& b);
Var operator*(Var a, const Matrix& b);
Var operator*(const Matrix& a, Var b);

Var tanh(Var a);
Var sigmoid(Var a);
Var exp(Var a);
Var log(Var a);
Var softplus(Var a);
Var square(Var a);

Var sum(Var a);
Var mean(Var a);
Var row_sum(Var a);
Var logsumexp_rows(Var a);
Var cols(Var a, std::size_t begin, std::size_t count);
Var col(Var a, std::size_t j);
Var hcat(const std::vector<Var>& parts);
Var diagonal(Var a);
Var reshape(Var a, std::size_t rows, std::size_t cols);

/// Parameter access for model code templated over plain and taped evaluation.
class PlainParams {
 public:
  using value_type = Matrix;
  explicit PlainParams(const Vec& theta) : theta_(&theta) {}
  Matrix get(std::size_t offset, std::size_t rows, std::size_t cols) const;
  Matrix lift(Matrix m) const { return m; }

 private:
  const Vec* theta_;
};

class TapeParams {
 public:
  using value_type = Var;
  TapeParams(Tape& tape, const Vec& theta) : tape_(&tape), theta_(&theta) {}
  Var get(std::size_t offset, std::size_t rows, std::size_t cols) const;
  Var lift(Matrix m) const { return tape_->constant(std::move(m)); }
  Tape& tape() const { return *tape_; }

 private:
  Tape* tape_;
  const Vec* theta_;
};

inline const Matrix& value_of(const Matrix& m) { return m; }
inline const Matrix& value_of(Var v) { return v.value(); }

struct GradResult {
  double value = 0;
  Vec gradient;
};

/// Evaluates a scalar objective on a fresh tape and returns dθ.
GradResult grad(const std::function<Var(TapeParams&)>& objective, const Vec& theta);

}  // namespace tmscm::ad
