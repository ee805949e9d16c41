#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tmscm::ad {

/// Dense row-major matrix; batches are rows.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix scalar(double v) { return Matrix(1, 1, v); }
  static Matrix row(std::span<const double> values);
  static Matrix column(std::span<const double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t k) { return data_[k]; }
  double operator[](std::size_t k) const { return data_[k]; }

  std::span<double> data() & { return data_; }
  std::span<const double> data() const& { return data_; }
  std::span<const double> data() && = delete;  // would dangle
  std::span<const double> row_span(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> row_span(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  const std::vector<double>& storage() const { return data_; }

  double item() const;
  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

// Value-level ops. Binary ops broadcast an operand whose row or column
// count is 1 against the other operand.

Matrix linear(const Matrix& x, const Matrix& w, const Matrix& b);  // x·wᵀ + b, b may be empty
Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator/(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a);
Matrix operator*(const Matrix& a, double s);
Matrix operator*(double s, const Matrix& a);
Matrix operator+(const Matrix& a, double s);
Matrix operator-(const Matrix& a, double s);

Matrix tanh(const Matrix& a);
Matrix sigmoid(const Matrix& a);
Matrix exp(const Matrix& a);
Matrix log(const Matrix& a);
Matrix softplus(const Matrix& a);
Matrix square(const Matrix& a);

Matrix sum(const Matrix& a);             // 1×1
Matrix mean(const Matrix& a);            // 1×1
Matrix row_sum(const Matrix& a);         // n×1
Matrix logsumexp_rows(const Matrix& a);  // n×1
Matrix cols(const Matrix& a, std::size_t begin, std::size_t count);
Matrix col(const Matrix& a, std::size_t j);
Matrix hcat(const std::vector<Matrix>& parts);
Matrix diagonal(const Matrix& a);  // square a -> 1×n
Matrix reshape(const Matrix& a, std::size_t rows, std::size_t cols);  // row-major order kept

/// Shape of the broadcast result of a and b (throws on mismatch).
std::pair<std::size_t, std::size_t> broadcast_shape(const Matrix& a, const Matrix& b);
/// Sums g over broadcast axes so it matches rows×cols.
Matrix reduce_to(const Matrix& g, std::size_t rows, std::size_t cols);

}  // namespace tmscm::ad
