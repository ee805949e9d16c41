#include "tmscm/ad/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "tmscm/error.hpp"
#include "tmscm/kernels.hpp"

namespace tmscm::ad {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  require(data_.size() == rows * cols, ErrorCode::ShapeMismatch, "matrix data length differs from rows*cols");
}

Matrix Matrix::row(std::span<const double> values) {
  return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::column(std::span<const double> values) {
  return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

double Matrix::item() const {
  require(rows_ == 1 && cols_ == 1, ErrorCode::NotScalar, "matrix is not 1x1");
  return data_[0];
}

std::pair<std::size_t, std::size_t> broadcast_shape(const Matrix& a, const Matrix& b) {
  auto dim = [](std::size_t x, std::size_t y) -> std::size_t {
    if (x == y) return x;
    if (x == 1) return y;
    if (y == 1) return x;
    fail(ErrorCode::ShapeMismatch, "cannot broadcast " + std::to_string(x) + " against " + std::to_string(y));
  };
  return {dim(a.rows(), b.rows()), dim(a.cols(), b.cols())};
}

namespace {

template <class Op>
Matrix broadcast(const Matrix& a, const Matrix& b, Op op) {
  const auto [r, c] = broadcast_shape(a, b);
  Matrix out(r, c);
  if (a.same_shape(b)) {
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = op(a[k], b[k]);
    return out;
  }
  const bool ar = a.rows() == 1, ac = a.cols() == 1, br = b.rows() == 1, bc = b.cols() == 1;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out(i, j) = op(a(ar ? 0 : i, ac ? 0 : j), b(br ? 0 : i, bc ? 0 : j));
  return out;
}

template <class Op>
Matrix unary(const Matrix& a, Op op) {
  Matrix out(a.rows(), a.cols());
  for (std::size_t k = 0; k < a.size(); ++k) out[k] = op(a[k]);
  return out;
}

}  // namespace

Matrix reduce_to(const Matrix& g, std::size_t rows, std::size_t cols) {
  if (g.rows() == rows && g.cols() == cols) return g;
  Matrix out(rows, cols);
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < g.cols(); ++j) out(rows == 1 ? 0 : i, cols == 1 ? 0 : j) += g(i, j);
  return out;
}

Matrix linear(const Matrix& x, const Matrix& w, const Matrix& b) {
  require(w.cols() == x.cols(), ErrorCode::ShapeMismatch, "linear: weight columns differ from input width");
  require(b.empty() || (b.rows() == 1 && b.cols() == w.rows()), ErrorCode::ShapeMismatch, "linear: bad bias shape");
  Matrix y(x.rows(), w.rows());
  kernels::parallel::linear_forward(x.data(), x.rows(), x.cols(), w.data(), w.rows(), b.data(), y.data());
  return y;
}

Matrix operator+(const Matrix& a, const Matrix& b) { return broadcast(a, b, [](double x, double y) { return x + y; }); }
Matrix operator-(const Matrix& a, const Matrix& b) { return broadcast(a, b, [](double x, double y) { return x - y; }); }
Matrix operator*(const Matrix& a, const Matrix& b) { return broadcast(a, b, [](double x, double y) { return x * y; }); }
Matrix operator/(const Matrix& a, const Matrix& b) { return broadcast(a, b, [](double x, double y) { return x / y; }); }
Matrix operator-(const Matrix& a) { return unary(a, [](double x) { return -x; }); }
Matrix operator*(const Matrix& a, double s) { return unary(a, [s](double x) { return x * s; }); }
Matrix operator*(double s, const Matrix& a) { return a * s; }
Matrix operator+(const Matrix& a, double s) { return unary(a, [s](double x) { return x + s; }); }
Matrix operator-(const Matrix& a, double s) { return a + (-s); }

Matrix tanh(const Matrix& a) { return unary(a, [](double x) { return std::tanh(x); }); }
Matrix sigmoid(const Matrix& a) {
  return unary(a, [](double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); });
}
Matrix exp(const Matrix& a) { return unary(a, [](double x) { return std::exp(x); }); }
Matrix log(const Matrix& a) { return unary(a, [](double x) { return std::log(x); }); }
Matrix softplus(const Matrix& a) {
  return unary(a, [](double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); });
}
Matrix square(const Matrix& a) { return unary(a, [](double x) { return x * x; }); }

Matrix sum(const Matrix& a) {
  double s = 0;
  for (double x : a.data()) s += x;
  return Matrix::scalar(s);
}

Matrix mean(const Matrix& a) {
  require(a.size() > 0, ErrorCode::ShapeMismatch, "mean of an empty matrix");
  return Matrix::scalar(sum(a).item() / static_cast<double>(a.size()));
}

Matrix row_sum(const Matrix& a) {
  Matrix out(a.rows(), 1);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0;
    for (double x : a.row_span(i)) s += x;
    out[i] = s;
  }
  return out;
}

Matrix logsumexp_rows(const Matrix& a) {
  Matrix out(a.rows(), 1);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto r = a.row_span(i);
    const double best = *std::max_element(r.begin(), r.end());
    if (!std::isfinite(best)) {
      out[i] = best;
      continue;
    }
    double acc = 0;
    for (double x : r) acc += std::exp(x - best);
    out[i] = best + std::log(acc);
  }
  return out;
}

Matrix cols(const Matrix& a, std::size_t begin, std::size_t count) {
  require(begin + count <= a.cols(), ErrorCode::BadRange, "column slice out of range");
  Matrix out(a.rows(), count);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < count; ++j) out(i, j) = a(i, begin + j);
  return out;
}

Matrix col(const Matrix& a, std::size_t j) { return cols(a, j, 1); }

Matrix hcat(const std::vector<Matrix>& parts) {
  require(!parts.empty(), ErrorCode::ShapeMismatch, "hcat of nothing");
  const std::size_t rows = parts.front().rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    require(p.rows() == rows, ErrorCode::ShapeMismatch, "hcat: row counts differ");
    total += p.cols();
  }
  Matrix out(rows, total);
  std::size_t at = 0;
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < p.cols(); ++j) out(i, at + j) = p(i, j);
    at += p.cols();
  }
  return out;
}

Matrix diagonal(const Matrix& a) {
  require(a.rows() == a.cols(), ErrorCode::ShapeMismatch, "diagonal of a non-square matrix");
  Matrix out(1, a.rows());
  for (std::size_t j = 0; j < a.rows(); ++j) out[j] = a(j, j);
  return out;
}

Matrix reshape(const Matrix& a, std::size_t rows, std::size_t cols) {
  require(rows * cols == a.size(), ErrorCode::ShapeMismatch, "reshape changes the element count");
  return Matrix(rows, cols, a.storage());
}

}  // namespace tmscm::ad
