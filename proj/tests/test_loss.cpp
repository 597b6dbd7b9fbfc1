#include <doctest.h>

#include <cmath>
#include <initializer_list>
#include <ntklab/loss.hpp>

using ntklab::logistic_loss;
using ntklab::logistic_loss_grad;

TEST_CASE("loss: values and stability at the tails") {
  CHECK(logistic_loss(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(logistic_loss(1.0) == doctest::Approx(std::log1p(std::exp(-1.0))).epsilon(1e-15));
  // Deep tails: no overflow, no underflow to junk.
  CHECK(logistic_loss(800.0) >= 0.0);
  CHECK(logistic_loss(800.0) < 1e-300);
  CHECK(logistic_loss(-800.0) == doctest::Approx(800.0).epsilon(1e-12));
  CHECK(std::isfinite(logistic_loss(-1e8)));
}

TEST_CASE("loss: positive and decreasing") {
  double prev = logistic_loss(-20.0);
  for (double z = -19.5; z <= 20.0; z += 0.5) {
    double cur = logistic_loss(z);
    CHECK(cur > 0.0);
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("loss grad: closed form and range") {
  for (double z : {-30.0, -2.0, -0.1, 0.0, 0.1, 2.0, 30.0}) {
    double g = logistic_loss_grad(z);
    CHECK(g > -1.0);
    CHECK(g < 0.0);
    CHECK(g == doctest::Approx(-1.0 / (1.0 + std::exp(z))).epsilon(1e-14));
  }
}

TEST_CASE("loss grad: dominated by the loss in both standard forms") {
  for (double z = -40.0; z <= 40.0; z += 0.25) {
    double l = logistic_loss(z);
    double g = std::fabs(logistic_loss_grad(z));
    CHECK(g <= l * (1.0 + 1e-12));
    CHECK(g <= std::sqrt(l / 2.0) * (1.0 + 1e-12));
  }
}

TEST_CASE("loss: curvature at most 1/4 (finite differences of the gradient)") {
  const double h = 1e-5;
  for (double z = -10.0; z <= 10.0; z += 0.125) {
    double second = (logistic_loss_grad(z + h) - logistic_loss_grad(z - h)) / (2.0 * h);
    CHECK(std::fabs(second) <= 0.25 + 1e-6);
  }
}
