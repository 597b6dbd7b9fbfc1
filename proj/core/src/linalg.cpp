#include "ntklab/linalg.hpp"

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "ntklab/errors.hpp"
#include "ntklab/rng.hpp"

namespace ntklab {

namespace {

using Apply = std::function<void(const std::vector<double>&, std::vector<double>&)>;

// v <- normalize(A^T A v), estimate sigma = ||A v||; Cauchy test on sigma.
SpectralEstimate power_iterate(std::size_t dim, const Apply& apply, const Apply& apply_t,
                               std::size_t out_dim, double rel_tol, int max_iterations,
                               std::uint64_t seed) {
  std::vector<double> v(dim);
  CounterRng rng = CounterRng(seed).stream(dim ^ (out_dim << 20));
  for (double& e : v) e = rng.next_gaussian();
  double n = norm(v);
  if (n == 0.0) {
    v[0] = 1.0;
    n = 1.0;
  }
  scale_in_place(v, 1.0 / n);

  std::vector<double> u(out_dim);
  std::vector<double> w(dim);
  double sigma = 0.0;
  for (int it = 1; it <= max_iterations; ++it) {
    apply(v, u);
    double s = norm(u);
    if (s == 0.0) return {0.0, it, true};  // v in the null space of a rank-deficient map
    apply_t(u, w);
    double wn = norm(w);
    if (wn == 0.0) return {s, it, true};
    for (std::size_t i = 0; i < dim; ++i) v[i] = w[i] / wn;
    if (it > 1 && std::abs(s - sigma) <= rel_tol * s) return {s, it, true};
    sigma = s;
  }
  return {sigma, max_iterations, false};
}

}  // namespace

SpectralEstimate spectral_norm_estimate(const Matrix& m, double rel_tol, int max_iterations,
                                        std::uint64_t seed) {
  if (m.empty()) return {0.0, 0, true};
  Apply fwd = [&m](const std::vector<double>& x, std::vector<double>& y) { matvec(m, x, y); };
  Apply bwd = [&m](const std::vector<double>& x, std::vector<double>& y) {
    matvec_transpose(m, x, y);
  };
  return power_iterate(m.cols(), fwd, bwd, m.rows(), rel_tol, max_iterations, seed);
}

double spectral_norm(const Matrix& m, double rel_tol) {
  SpectralEstimate est = spectral_norm_estimate(m, rel_tol);
  if (!est.converged)
    throw NumericalError("spectral norm did not converge in " + std::to_string(est.iterations) +
                         " iterations; best estimate " + std::to_string(est.value));
  return est.value;
}

SpectralEstimate product_operator_norm_estimate(const NetworkParams& p,
                                                const ActivationTrace& trace, int first,
                                                int last, double rel_tol, int max_iterations,
                                                std::uint64_t seed) {
  int depth = p.config.depth;
  if (first < 2 || first > last || last > depth)
    throw ConfigError("product norm needs 2 <= first <= last <= depth, got [" +
                      std::to_string(first) + ", " + std::to_string(last) + "] at depth " +
                      std::to_string(depth));
  if (trace.active.size() != static_cast<std::size_t>(depth))
    throw ConfigError("trace depth does not match network depth");
  std::size_t m = static_cast<std::size_t>(p.config.width);
  double scale = std::sqrt(2.0 / static_cast<double>(m));

  std::vector<double> tmp(m);
  Apply fwd = [&, scale, first, last](const std::vector<double>& x, std::vector<double>& y) {
    y = x;
    for (int l = first; l <= last; ++l) {
      matvec(p.layers[l - 1], y, tmp);
      const std::vector<std::uint8_t>& bits = trace.active[l - 1];
      for (std::size_t r = 0; r < m; ++r) y[r] = bits[r] ? scale * tmp[r] : 0.0;
    }
  };
  Apply bwd = [&, scale, first, last](const std::vector<double>& x, std::vector<double>& y) {
    y = x;
    for (int l = last; l >= first; --l) {
      const std::vector<std::uint8_t>& bits = trace.active[l - 1];
      for (std::size_t r = 0; r < m; ++r) tmp[r] = bits[r] ? scale * y[r] : 0.0;
      matvec_transpose(p.layers[l - 1], tmp, y);
    }
  };
  return power_iterate(m, fwd, bwd, m, rel_tol, max_iterations, seed);
}

double product_operator_norm(const NetworkParams& p, const ActivationTrace& trace, int first,
                             int last, double rel_tol) {
  SpectralEstimate est = product_operator_norm_estimate(p, trace, first, last, rel_tol);
  if (!est.converged)
    throw NumericalError("product operator norm did not converge; best estimate " +
                         std::to_string(est.value));
  return est.value;
}

}  // namespace ntklab
