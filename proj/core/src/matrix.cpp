#include "ntklab/matrix.hpp"

#include <cassert>
#include <cmath>

#include "ntklab/threading.hpp"

namespace ntklab {

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

void matvec(const Matrix& m, std::span<const double> x, std::span<double> y) {
  assert(x.size() == m.cols() && y.size() == m.rows());
  parallel_for(m.rows(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) y[r] = dot(m.row_span(r), x);
  });
}

void matvec_transpose(const Matrix& m, std::span<const double> x, std::span<double> y) {
  assert(x.size() == m.rows() && y.size() == m.cols());
  for (std::size_t j = 0; j < m.cols(); ++j) y[j] = 0.0;
  std::size_t rows = m.rows();
  if (rows % 2 == 0) {
    std::size_t half = rows / 2;
    for (std::size_t r = 0; r < half; ++r) {
      const double* top = m.row(r);
      const double* bot = m.row(r + half);
      double ct = x[r];
      double cb = x[r + half];
      for (std::size_t j = 0; j < m.cols(); ++j) y[j] += ct * top[j] + cb * bot[j];
    }
  } else {
    for (std::size_t r = 0; r < rows; ++r) {
      const double* row = m.row(r);
      double c = x[r];
      for (std::size_t j = 0; j < m.cols(); ++j) y[j] += c * row[j];
    }
  }
}

double squared_norm(std::span<const double> v) {
  long double acc = 0.0L;
  for (double e : v) acc += static_cast<long double>(e) * e;
  return static_cast<double>(acc);
}

double norm(std::span<const double> v) { return std::sqrt(squared_norm(v)); }

double frobenius_norm(const Matrix& m) { return norm({m.data(), m.size()}); }

double squared_frobenius_distance(const Matrix& a, const Matrix& b) {
  assert(a.rows() == b.rows() && a.cols() == b.cols());
  long double acc = 0.0L;
  const double* pa = a.data();
  const double* pb = b.data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    long double d = static_cast<long double>(pa[i]) - pb[i];
    acc += d * d;
  }
  return static_cast<double>(acc);
}

double frobenius_distance(const Matrix& a, const Matrix& b) {
  return std::sqrt(squared_frobenius_distance(a, b));
}

void scale_in_place(std::span<double> v, double alpha) {
  for (double& e : v) e *= alpha;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

}  // namespace ntklab
