#include "ntklab/loss.hpp"

#include <cmath>

namespace ntklab {

double logistic_loss(double z) {
  if (z >= 0.0) return std::log1p(std::exp(-z));
  return -z + std::log1p(std::exp(z));
}

double logistic_loss_grad(double z) {
  if (z >= 0.0) {
    double e = std::exp(-z);
    return -e / (1.0 + e);
  }
  return -1.0 / (1.0 + std::exp(z));
}

}  // namespace ntklab
