#pragma once

// Independent re-implementations used as test oracles. Everything here is
// written the dumbest way that works (naive loops, dense products, exhaustive
// grids) so that agreement with the library is meaningful.

#include <array>
#include <span>
#include <vector>

#include <ntklab/dataset.hpp>
#include <ntklab/matrix.hpp>
#include <ntklab/network.hpp>

namespace oracle {

// f(x) by plain nested loops in natural index order (no paired summation).
double slow_forward(const ntklab::NetworkParams& p, std::span<const double> x);

// Central finite differences of f at x, one entry at a time.
ntklab::GradientSet fd_gradients(const ntklab::NetworkParams& p, std::span<const double> x,
                                 double h);

// Smallest |pre-activation| over all layers and units at x; 0 means a kink.
double min_preactivation_margin(const ntklab::NetworkParams& p, std::span<const double> x);

// Largest singular value by one-sided Jacobi (cyclic sweeps until all column
// pairs are orthogonal to rel_tol). Dense and slow; small matrices only.
double jacobi_spectral_norm(const ntklab::Matrix& m, double rel_tol = 1e-12);

// Dense matrix of the masked product sqrt(2/m) S^last W^last ... sqrt(2/m)
// S^first W^first taken from the trace bits.
ntklab::Matrix materialize_masked_product(const ntklab::NetworkParams& p,
                                          const ntklab::ActivationTrace& trace, int first,
                                          int last);

// Hard margin of 2-d feature vectors by brute force over `directions` equally
// spaced unit directions: max_w min_i <w, phi_i>, clamped at 0.
double grid_margin_2d(const std::vector<std::array<double, 2>>& feats, int directions);

// Mean over sign vectors of (radius / n) * || sum_i e_i df/dW(x_i) ||_F with
// the gradients materialized as dense per-layer matrices.
double materialized_rademacher_mean(const ntklab::NetworkParams& p,
                                    const ntklab::LabeledDataset& data, double radius,
                                    const std::vector<std::vector<double>>& signs);

}  // namespace oracle
