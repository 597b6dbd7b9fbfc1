#include <doctest.h>

#include <array>
#include <cmath>
#include <ntklab/dataset.hpp>
#include <ntklab/errors.hpp>
#include <ntklab/experiments.hpp>
#include <ntklab/margin.hpp>
#include <ntklab/network.hpp>
#include <ntklab/rng.hpp>
#include <vector>

#include "oracles.hpp"

using namespace ntklab;

namespace {

Matrix gram_of(const std::vector<std::array<double, 2>>& feats) {
  Matrix g(feats.size(), feats.size());
  for (std::size_t i = 0; i < feats.size(); ++i)
    for (std::size_t j = 0; j < feats.size(); ++j)
      g(i, j) = feats[i][0] * feats[j][0] + feats[i][1] * feats[j][1];
  return g;
}

}  // namespace

TEST_CASE("min norm point: textbook instances") {
  // Hull of (1,0) and (0,1): closest point (1/2, 1/2).
  MinNormResult r = min_norm_point(gram_of({{1.0, 0.0}, {0.0, 1.0}}), 1e-10);
  CHECK(r.converged);
  CHECK(r.norm == doctest::Approx(std::sqrt(0.5)).epsilon(1e-8));
  REQUIRE(r.weights.size() == 2);
  CHECK(r.weights[0] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(r.dual_gap <= 1e-10 * std::max(1.0, r.norm * r.norm));

  // Singleton hull.
  MinNormResult s = min_norm_point(gram_of({{3.0, 4.0}}), 1e-10);
  CHECK(s.norm == doctest::Approx(5.0).epsilon(1e-10));
  CHECK(s.weights[0] == doctest::Approx(1.0));

  // Origin strictly inside the hull.
  MinNormResult z =
      min_norm_point(gram_of({{1.0, 0.0}, {-0.6, 0.8}, {-0.6, -0.8}}), 1e-10);
  CHECK(z.norm <= 1e-5);
}

TEST_CASE("min norm point: weights stay on the simplex") {
  CounterRng rng(44);
  std::vector<std::array<double, 2>> feats;
  for (int i = 0; i < 12; ++i)
    feats.push_back({1.5 + rng.next_gaussian(), 2.0 + rng.next_gaussian()});
  MinNormResult r = min_norm_point(gram_of(feats), 1e-10);
  double sum = 0.0;
  for (double w : r.weights) {
    CHECK(w >= -1e-12);
    sum += w;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("min norm point: matches the direction grid on random separable toys") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    CounterRng rng(seed);
    // Features in a half-plane around a random direction: separable by design.
    double theta = 2.0 * M_PI * rng.next_unit();
    std::vector<std::array<double, 2>> feats;
    for (int i = 0; i < 10; ++i) {
      double ang = theta + 1.1 * (rng.next_unit() - 0.5);
      double len = 0.5 + 1.5 * rng.next_unit();
      feats.push_back({len * std::cos(ang), len * std::sin(ang)});
    }
    double gamma = min_norm_point(gram_of(feats), 1e-12).norm;
    double grid = oracle::grid_margin_2d(feats, 4000);
    CHECK(std::fabs(gamma - grid) <= 1e-3);
  }
}

TEST_CASE("tangent features: last-layer block of the signed gradient") {
  NetworkConfig nc{2, 12, 5, 6};
  NetworkParams init = init_symmetric(nc);
  XorSpec spec;
  spec.dim = 5;
  spec.seed = 9;
  LabeledDataset data = xor_sample(spec, 6);
  std::vector<TangentFeature> feats = tangent_features(init, data);
  REQUIRE(feats.size() == 6);
  for (std::size_t i = 0; i < feats.size(); ++i) {
    ActivationTrace trace;
    forward_with_trace(init, data.point(i), trace);
    GradientSet g = layer_gradients(init, trace);
    const Matrix& last = g.layers[nc.depth - 1];
    // Frobenius norm must match the materialized gradient.
    CHECK(feats[i].frobenius() ==
          doctest::Approx(frobenius_norm(last)).epsilon(1e-12));
    // Blockwise dot must match the materialized inner product, signs included.
    for (std::size_t j = 0; j < i; ++j) {
      ActivationTrace tj;
      forward_with_trace(init, data.point(j), tj);
      Matrix lj = layer_gradients(init, tj).layers[nc.depth - 1];
      double dense = 0.0;
      for (std::size_t k = 0; k < last.size(); ++k)
        dense += last.data()[k] * lj.data()[k];
      dense *= data.labels[i] * data.labels[j];
      CHECK(feats[i].dot(feats[j]) == doctest::Approx(dense).epsilon(1e-10));
    }
  }
}

TEST_CASE("tangent features: broken symmetry is rejected") {
  NetworkParams init = init_symmetric({2, 8, 4, 3});
  XorSpec spec;
  spec.dim = 4;
  spec.seed = 2;
  LabeledDataset data = xor_sample(spec, 4);
  NetworkParams bent = init;
  bent.layers[1](0, 0) += 1e-3;  // last layer loses the duplicated-row structure
  CHECK_THROWS_AS(tangent_features(bent, data), ConfigError);
}

TEST_CASE("solve_margin: certificate invariants on a real instance") {
  NetworkConfig nc{1, 64, 6, 12};
  NetworkParams init = init_symmetric(nc);
  XorSpec spec;
  spec.dim = 6;
  spec.seed = 5;
  LabeledDataset data = xor_sample(spec, 14);
  std::vector<TangentFeature> feats = tangent_features(init, data);
  MarginCertificate cert = solve_margin(feats, 1e-9);
  CHECK(cert.converged);
  CHECK(cert.gamma > 0.0);
  CHECK(cert.w_star.frobenius() == doctest::Approx(1.0).epsilon(1e-10));
  double wsum = 0.0;
  for (double w : cert.dual_weights) {
    CHECK(w >= -1e-12);
    wsum += w;
  }
  CHECK(wsum == doctest::Approx(1.0).epsilon(1e-12));
  // Every feature clears gamma up to the reported gap.
  const Matrix& dir = cert.w_star.layers.back();
  for (const TangentFeature& f : feats) {
    double inner = 0.0;
    for (std::size_t r = 0; r < dir.rows(); ++r)
      for (std::size_t c = 0; c < dir.cols(); ++c)
        inner += dir(r, c) * f.out_factor[r] * f.in_factor[c];
    CHECK(inner >= cert.gamma - cert.dual_gap - 1e-12);
  }
}

TEST_CASE("solve_margin: duplicated point with both labels has zero margin") {
  NetworkConfig nc{1, 32, 5, 8};
  NetworkParams init = init_symmetric(nc);
  LabeledDataset data = sphere_sample(5, 1, 3);
  data.points = [&] {
    Matrix m(2, 5);
    for (int j = 0; j < 5; ++j) m(0, j) = m(1, j) = data.points(0, j);
    return m;
  }();
  data.labels = {1.0, -1.0};
  MarginCertificate cert = solve_margin(tangent_features(init, data), 1e-8);
  CHECK(cert.gamma == 0.0);
  for (const Matrix& l : cert.w_star.layers) CHECK(frobenius_norm(l) == 0.0);
}

TEST_CASE("build_reference: shift along the maximizer") {
  NetworkConfig nc{1, 256, 6, 21};
  NetworkParams init = init_symmetric(nc);
  XorSpec spec;
  spec.dim = 6;
  spec.seed = 13;
  LabeledDataset data = xor_sample(spec, 12);
  MarginCertificate cert = solve_margin(tangent_features(init, data), 1e-10);
  REQUIRE(cert.gamma > 0.0);
  const int horizon = 64;
  ReferenceModel ref = build_reference(init, cert, data, horizon);
  CHECK(ref.shift_norm ==
        doctest::Approx(2.0 * std::log(double(horizon)) / cert.gamma).epsilon(1e-12));
  CHECK(ref.linear_margin == doctest::Approx(2.0 * std::log(double(horizon))).epsilon(1e-12));
  CHECK(frobenius_distance(init, ref.params) ==
        doctest::Approx(ref.shift_norm).epsilon(1e-10));
  REQUIRE(ref.margins.size() == data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(ref.margins[i] ==
          doctest::Approx(data.labels[i] * forward(ref.params, data.point(i))).epsilon(1e-12));
  }
  CHECK_THROWS_AS(build_reference(init, cert, data, 1), ConfigError);

  MarginCertificate flat;  // gamma defaults to 0
  CHECK_THROWS_AS(build_reference(init, flat, data, horizon), ConfigError);
}

TEST_CASE("margin trend: smoke over two dimensions") {
  std::vector<MarginTrendPoint> points;
  PowerFit fit = margin_dimension_trend(64, 1, 16, {4, 6}, 3, points);
  REQUIRE(points.size() == 2);
  CHECK(points[0].gamma > 0.0);
  CHECK(points[1].gamma > 0.0);
  CHECK(std::isfinite(fit.exponent));
}
