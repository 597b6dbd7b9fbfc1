#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ntklab/matrix.hpp"

namespace ntklab {

struct NetworkConfig {
  int depth = 1;           // number of weight layers L; depth 1 is the two-layer net
  int width = 2;           // m, must be even
  int input_dim = 1;       // d
  std::uint64_t seed = 0;

  void validate() const;   // throws ConfigError
};

// Weights of f(x) = a^T h^L(x) with h^l(x) = sqrt(2/m) relu(W^l h^{l-1}(x)) and
// h^0 = x. layers[0] is width x input_dim; layers[1..L-1] are width x width.
// out_signs holds the frozen output signs a in {-1,+1}^m; they are not trained
// and are excluded from parameter distances.
struct NetworkParams {
  NetworkConfig config;
  std::vector<Matrix> layers;
  std::vector<double> out_signs;

  std::size_t parameter_count() const;
};

// h[0] = x, h[l] = post-activation vector of layer l (already scaled by
// sqrt(2/m)). active[l-1][r] is 1 iff <w^l_r, h^{l-1}> >= 0; a zero
// pre-activation counts as active. Reconstruction invariant: recomputing
// sqrt(2/m) * (active ⊙ W^l h[l-1]) in the same operation order reproduces
// h[l] bit for bit.
struct ActivationTrace {
  std::vector<std::vector<double>> h;
  std::vector<std::vector<std::uint8_t>> active;
};

// Per-layer matrices shaped like NetworkParams::layers. An empty matrix means
// an identically zero block.
struct GradientSet {
  std::vector<Matrix> layers;

  double squared_frobenius() const;
  double frobenius() const;
};

enum class InputCheck {
  strict,   // require | ||x|| - 1 | <= 1e-12
  relaxed,  // probe use: any finite input
};

// Symmetric initialization. Layers below the last have i.i.d. standard normal
// rows; the last layer has i.i.d. rows r < m/2 with row r + m/2 a bitwise copy,
// and out_signs are i.i.d. +-1 on the first half with the second half negated.
// Stream layout: layer l uses stream l (1-based), row r uses sub-stream r;
// out_signs use stream 0. Consequences, exact in floating point: f(x) = 0 for
// every x, and the risk gradient of every layer below the last vanishes.
NetworkParams init_symmetric(const NetworkConfig& cfg);

double forward(const NetworkParams& p, std::span<const double> x,
               InputCheck check = InputCheck::strict);

double forward_with_trace(const NetworkParams& p, std::span<const double> x,
                          ActivationTrace& trace, InputCheck check = InputCheck::strict);

// Backpropagation vectors v_l with df/dW^l = v_l (h^{l-1})^T. v_L masks the
// output signs; each step down multiplies by the transposed next layer with
// paired row summation, which is what makes the symmetric cancellation exact.
std::vector<std::vector<double>> backprop_vectors(const NetworkParams& p,
                                                  const ActivationTrace& trace);

// Materialized per-layer gradients of f at one input (rank-one outer products).
GradientSet layer_gradients(const NetworkParams& p, const ActivationTrace& trace);

// Frobenius distance over trainable weights (out_signs excluded).
double frobenius_distance(const NetworkParams& a, const NetworkParams& b);
double squared_frobenius_distance(const NetworkParams& a, const NetworkParams& b);
std::vector<double> layer_frobenius_distances(const NetworkParams& a, const NetworkParams& b);

// Adds to every layer an independent Gaussian direction rescaled to Frobenius
// norm exactly radius. Streams: layer l uses stream l, row r sub-stream r.
NetworkParams perturb_layers(const NetworkParams& p, double radius, std::uint64_t seed);

}  // namespace ntklab
