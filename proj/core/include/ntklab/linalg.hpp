#pragma once

#include <cstdint>

#include "ntklab/matrix.hpp"
#include "ntklab/network.hpp"

namespace ntklab {

struct SpectralEstimate {
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Largest singular value by power iteration on M^T M with a seeded Gaussian
// start vector. Stops when successive estimates agree to rel_tol (so the
// returned value is a slight underestimate on near-degenerate spectra).
SpectralEstimate spectral_norm_estimate(const Matrix& m, double rel_tol = 1e-8,
                                        int max_iterations = 10000, std::uint64_t seed = 0);

// Throws NumericalError on non-convergence; the message carries the best estimate.
double spectral_norm(const Matrix& m, double rel_tol = 1e-8);

// Operator norm of the masked product sqrt(2/m) S^b W^b ... sqrt(2/m) S^a W^a
// where S^l = diag(active bits of layer l from the trace). Applied matrix-free;
// 2 <= first <= last <= depth.
SpectralEstimate product_operator_norm_estimate(const NetworkParams& p,
                                                const ActivationTrace& trace, int first,
                                                int last, double rel_tol = 1e-8,
                                                int max_iterations = 10000,
                                                std::uint64_t seed = 0);

double product_operator_norm(const NetworkParams& p, const ActivationTrace& trace, int first,
                             int last, double rel_tol = 1e-8);

}  // namespace ntklab
