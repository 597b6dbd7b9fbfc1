#include <doctest.h>

#include <cmath>
#include <ntklab/matrix.hpp>
#include <vector>

using namespace ntklab;

TEST_CASE("matrix: shape and element access") {
  Matrix m(3, 2);
  CHECK(m.rows() == 3);
  CHECK(m.cols() == 2);
  CHECK(m.size() == 6);
  m(2, 1) = 5.0;
  CHECK(m(2, 1) == 5.0);
  CHECK(m.row(2)[1] == 5.0);
  CHECK(m.row_span(2)[1] == 5.0);
  CHECK(m(0, 0) == 0.0);
}

TEST_CASE("dot: sequential index order") {
  // Values chosen so reassociation changes the result; the contract order is
  // ((a0*b0 + a1*b1) + a2*b2) + a3*b3.
  std::vector<double> a{1e16, 1.0, -1e16, 1.0};
  std::vector<double> b{1.0, 1.0, 1.0, 1.0};
  double expect = ((a[0] * b[0] + a[1] * b[1]) + a[2] * b[2]) + a[3] * b[3];
  CHECK(dot(a, b) == expect);
}

TEST_CASE("matvec: one dot per row") {
  Matrix m(2, 3);
  double v = 0.5;
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 3; ++j) m(i, j) = v += 1.0;
  std::vector<double> x{1.0, -2.0, 3.0};
  std::vector<double> y(2);
  matvec(m, x, y);
  CHECK(y[0] == dot(m.row_span(0), x));
  CHECK(y[1] == dot(m.row_span(1), x));
}

TEST_CASE("matvec_transpose: paired rows cancel duplicated structure exactly") {
  // Rows (r, r + rows/2) identical, x second half negated: contributions are
  // w*x_r + w*(-x_r) per pair, summed pairwise, so the result is exactly zero.
  Matrix m(4, 3);
  for (std::size_t j = 0; j < 3; ++j) {
    m(0, j) = 0.1 * static_cast<double>(j + 1);
    m(1, j) = -1.7 + static_cast<double>(j);
    m(2, j) = m(0, j);
    m(3, j) = m(1, j);
  }
  std::vector<double> x{0.3, 1.9, -0.3, -1.9};
  std::vector<double> y(3, 123.0);
  matvec_transpose(m, x, y);
  for (double v : y) CHECK(v == 0.0);
}

TEST_CASE("matvec_transpose: odd row count falls back to plain order") {
  Matrix m(3, 2);
  m(0, 0) = 1; m(0, 1) = 2;
  m(1, 0) = 3; m(1, 1) = 4;
  m(2, 0) = 5; m(2, 1) = 6;
  std::vector<double> x{1.0, 10.0, 100.0};
  std::vector<double> y(2);
  matvec_transpose(m, x, y);
  CHECK(y[0] == doctest::Approx(531.0));
  CHECK(y[1] == doctest::Approx(642.0));
}

TEST_CASE("norms") {
  std::vector<double> v{3.0, 4.0};
  CHECK(squared_norm(v) == 25.0);
  CHECK(norm(v) == 5.0);
  Matrix a(2, 2), b(2, 2);
  a(0, 0) = 1.0; a(1, 1) = 2.0;
  b(0, 0) = 1.0; b(1, 1) = -1.0;
  CHECK(frobenius_norm(a) == doctest::Approx(std::sqrt(5.0)));
  CHECK(squared_frobenius_distance(a, b) == doctest::Approx(9.0));
  CHECK(frobenius_distance(a, b) == doctest::Approx(3.0));
}

TEST_CASE("scale and axpy") {
  std::vector<double> v{1.0, -2.0};
  scale_in_place(v, 3.0);
  CHECK(v[0] == 3.0);
  CHECK(v[1] == -6.0);
  std::vector<double> y{1.0, 1.0};
  axpy(0.5, v, y);
  CHECK(y[0] == 2.5);
  CHECK(y[1] == -2.0);
}
