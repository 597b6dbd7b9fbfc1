#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "ntklab/dataset.hpp"
#include "ntklab/network.hpp"

namespace ntklab {

// Label-signed gradient feature y * df/dW at a symmetric initialization. Only
// the last layer is nonzero there, and it is the rank-one outer product
// out_factor * in_factor^T with out_factor = y * sqrt(2/m) * (active ⊙ signs)
// and in_factor = h^{L-1}(x). Layers below the last are omitted; flattening is
// virtual, inner products contract the factors blockwise.
struct TangentFeature {
  int depth = 1;
  std::vector<double> out_factor;
  std::vector<double> in_factor;

  double squared_frobenius() const;
  double frobenius() const { return std::sqrt(squared_frobenius()); }
  double dot(const TangentFeature& other) const;
};

// Requires the exact symmetric structure (duplicated last-layer rows, negated
// second-half signs); throws ConfigError otherwise, since features below the
// last layer would then be nonzero.
std::vector<TangentFeature> tangent_features(const NetworkParams& init,
                                             const LabeledDataset& data);

struct MinNormResult {
  std::vector<double> weights;  // simplex coefficients
  double norm = 0.0;            // || sum_i weights_i phi_i ||
  double dual_gap = 0.0;        // Frank-Wolfe gap 2(||p||^2 - min_i <p, phi_i>)
  int iterations = 0;
  bool converged = false;
};

// Minimum-norm point of the convex hull spanned by features with the given
// Gram matrix, by Frank-Wolfe with away steps and exact line search. Stops
// when the Frank-Wolfe gap is at most tol * max(1, ||p||^2).
MinNormResult min_norm_point(const Matrix& gram, double tol = 1e-8, int max_iterations = 100000);

struct MarginCertificate {
  double gamma = 0.0;                   // hard margin = distance from origin to the hull
  GradientSet w_star;                   // unit Frobenius maximizer; zero when gamma == 0
  std::vector<double> dual_weights;
  double dual_gap = 0.0;                // margin scale: min_i <w_star, phi_i> >= gamma - dual_gap
  int iterations = 0;
  bool converged = false;
  std::vector<std::string> notes;
};

// Hard margin over the feature hull via the minimum-norm point: gamma = ||p||
// and w_star = p / ||p||. ||p|| <= tol reports gamma = 0 with w_star = 0.
MarginCertificate solve_margin(const std::vector<TangentFeature>& features, double tol = 1e-8,
                               int max_iterations = 100000);

struct ReferenceModel {
  NetworkParams params;          // init shifted by shift_norm * w_star
  double shift_norm;             // 2 log(horizon) / gamma
  double linear_margin;          // shift_norm * gamma = 2 log(horizon)
  std::vector<double> margins;   // realized y_i f(x_i) at the shifted parameters
  std::vector<std::string> notes;
};

// Shifts the initialization along the margin maximizer far enough that the
// linearized margin is 2 log(horizon). Requires gamma > 0 and horizon >= 2.
ReferenceModel build_reference(const NetworkParams& init, const MarginCertificate& cert,
                               const LabeledDataset& data, int horizon);

}  // namespace ntklab
