#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ntklab {

// Dense row-major matrix of doubles. Kept deliberately plain: the contracts in
// this project pin exact summation orders (sequential dots, paired row sums),
// which rules out delegating to a BLAS.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  double* row(std::size_t i) { return data_.data() + i * cols_; }
  const double* row(std::size_t i) const { return data_.data() + i * cols_; }
  std::span<const double> row_span(std::size_t i) const { return {row(i), cols_}; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Sequential dot in index order, double accumulator. This order is part of the
// reproducibility contract; oracles recompute it independently.
double dot(std::span<const double> a, std::span<const double> b);

// y = M x. One dot per output row; rows may be computed in parallel because
// each row writes one disjoint slot.
void matvec(const Matrix& m, std::span<const double> x, std::span<double> y);

// y = M^T x, accumulated over row pairs (r, r + rows/2) when the row count is
// even, else in plain row order. The pairing makes the duplicated-row structure
// of a symmetric last layer cancel exactly in backpropagation.
void matvec_transpose(const Matrix& m, std::span<const double> x, std::span<double> y);

// Long-double accumulation; used in norms and probe reductions.
double squared_norm(std::span<const double> v);
double norm(std::span<const double> v);
double frobenius_norm(const Matrix& m);
double frobenius_distance(const Matrix& a, const Matrix& b);
double squared_frobenius_distance(const Matrix& a, const Matrix& b);

void scale_in_place(std::span<double> v, double alpha);
// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

}  // namespace ntklab
