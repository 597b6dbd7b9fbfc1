#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ntklab/dataset.hpp"
#include "ntklab/margin.hpp"
#include "ntklab/network.hpp"
#include "ntklab/trainer.hpp"

namespace ntklab {

struct PowerFit {
  double exponent = 0.0;
  double intercept = 0.0;  // fit of log y = exponent * log x + intercept
  double r2 = 0.0;
};

// Least squares on (log x, log y); requires positive values and >= 2 points.
PowerFit fit_power_law(const std::vector<std::pair<double, double>>& xy);

struct ProbeReport {
  std::string name;
  std::map<std::string, double> scalars;
  std::map<std::string, std::vector<std::pair<double, double>>> series;
  std::optional<PowerFit> fit;
  std::map<std::string, std::string> meta;
  std::vector<std::string> flags;  // e.g. "low_r2", "not_monotone"
};

// Shared knobs for the width sweeps. Each cell draws `repeats` fresh
// initializations; perturbations move every layer by Frobenius norm `radius`.
struct ScalingSweep {
  std::vector<int> widths;
  int repeats = 10;
  int depth = 2;
  int input_dim = 8;
  int sample_count = 8;   // unit-sphere evaluation points
  double radius = 1.0;
  std::uint64_t seed = 0;
};

// --- activation geometry ------------------------------------------------

// Per-layer counts of activation bits that differ between the two parameter
// sets on the given points. scalars: max_flips (max over points and layers of
// the per-layer count); series flips_by_layer: (layer, max over points).
ProbeReport flip_probe(const NetworkParams& init, const NetworkParams& perturbed,
                       const LabeledDataset& data);

// Width scaling of the flip count under the worst perturbation in the
// per-layer radius ball, with a power-law fit in the width. For each point the
// first-layer radius budget is spent greedily on the rows with the smallest
// pre-activation margins — the extremal perturbation the flip bound is tight
// for; cells record the median over inits of the mean per-point count.
// (A radius-R Gaussian direction spreads over all rows and only flips
// O(sqrt(m)) signs, so random perturbations cannot exhibit the m^(2/3) rate.)
// flags "low_r2" below 0.7.
ProbeReport flip_sweep(const ScalingSweep& sweep);

// Max over points and layers of || h^l - h^l_init ||_2. scalars: max_drift;
// series drift_by_layer.
ProbeReport drift_probe(const NetworkParams& init, const NetworkParams& perturbed,
                        const LabeledDataset& data);

// Drift ratio when the width doubles at fixed depth and radius; widths must be
// {w, 2w}. scalars: median_ratio over repeats.
ProbeReport drift_doubling(const ScalingSweep& sweep);

// Normalized hidden-layer drift constant: max over points, perturbations and
// layers of drift * sqrt(m) / (depth^2 * radius * sqrt(log m)). Requires
// radius >= 1. Point and perturbation streams are prefix-stable, so the
// constant is monotone in n_points at a fixed seed.
ProbeReport lipschitz_probe(const NetworkParams& init, double radius, int n_points,
                            int n_perturbations, std::uint64_t seed);

// --- smoothness ---------------------------------------------------------

// Residual of the first-order expansion at w against w_bar:
// | f_w(x) - f_wbar(x) - <df_w/dW, w - w_bar> | per point; scalars max_residual
// and median_residual.
ProbeReport semi_smooth_probe(const NetworkParams& w, const NetworkParams& w_bar,
                              const LabeledDataset& data);

// Median residual over `repeats` random perturbation pairs per width; flags
// "not_monotone" unless the medians strictly decrease along widths.
ProbeReport semi_smooth_sweep(const ScalingSweep& sweep);

// Max over points and layers of || df_w/dW^l - df_ref/dW^l ||_F (rank-one
// algebra, nothing materialized). scalars: max_grad_drift.
ProbeReport grad_drift_probe(const NetworkParams& w, const NetworkParams& ref,
                             const LabeledDataset& data);

ProbeReport grad_drift_sweep(const ScalingSweep& sweep);

// --- descent ------------------------------------------------------------

// Per-step slack of the descent inequality along a densely snapshotted
// trajectory: s_t = ||W(t)-ref||^2 - ||W(t+1)-ref||^2 - eta * risk(W(t))
//                 + 3 * eta * risk(ref) should be >= -epsilon with
// epsilon = 0.01 * eta * risk(W(0)). Also checks the telescoped invariant
// ||W(t)-ref||^2 + eta * sum_{k<t} risk(W(k)) against the descent objective
// F_S = 3 * eta * T * risk(ref) + ||W(0)-ref||^2.
// scalars: fraction_satisfied, epsilon, objective, invariant_max_ratio.
ProbeReport descent_probe(const Trajectory& traj, const NetworkParams& reference,
                          const LabeledDataset& data, double step_size);

// --- initialization norms -----------------------------------------------

// Norm suite at a symmetric init: per-layer spectral norms over sqrt(m), the
// hidden-norm band over the given points, the last-layer gradient Frobenius
// norm, and masked-product operator norms over all layer ranges 2 <= a <= b,
// normalized by depth * sqrt(log m). Product norms are evaluated at the first
// product_points sample points (power iteration at every (range, point) pair
// is the expensive part); spectral_tol is passed through to the iteration.
ProbeReport init_norm_probe(const NetworkParams& init, const LabeledDataset& data,
                            double spectral_tol = 1e-6, int product_points = 1);

// --- statistical identities ----------------------------------------------

// Monte-Carlo check of E[ 1{<w,c> >= 0} <w,b>^2 ] = ||b||^2 / 2 for standard
// normal w. trials >= 10000.
double gaussian_indicator_estimate(std::span<const double> c, std::span<const double> b,
                                   std::int64_t trials, std::uint64_t seed);
ProbeReport gaussian_indicator_check(int dim, std::int64_t trials, std::uint64_t seed);

// Sign vectors for the complexity estimates; entries are +-1.
std::vector<std::vector<double>> sample_sign_vectors(std::size_t n, int draws,
                                                     std::uint64_t seed);
std::vector<std::vector<double>> all_sign_vectors(std::size_t n);  // n <= 20

// Mean over sign draws of the exact supremum of the linearized class on a ball
// of the given radius: sup_{||D||_F <= B} (1/n) sum_i e_i <df(x_i)/dW, D>
//   = (B/n) || sum_i e_i df(x_i)/dW ||_F, contracted blockwise. scalars:
// estimate, shape_ratio against B * depth^2 * sqrt(log(m)/n).
ProbeReport rademacher_linearized(const NetworkParams& init, const LabeledDataset& data,
                                  double ball_radius,
                                  const std::vector<std::vector<double>>& signs);

// Mean over sign draws of max over snapshots t of (1/n) sum_i e_i f_{W(t)}(x_i).
// A lower estimate for the trained-iterate class; exactly 0 on the trivial
// trajectory that only contains a symmetric init.
ProbeReport rademacher_iterates(const Trajectory& traj, const LabeledDataset& data,
                                const std::vector<std::vector<double>>& signs);

// --- generalization bound evaluation -------------------------------------

struct GenBoundInputs {
  double train_loss;    // empirical risk at the parameters under test
  double rademacher;    // complexity estimate for the class
  double g_prime;       // loss-range constant for the class
  double n;             // sample size
  double delta;         // confidence level
};

struct GenBoundResult {
  double value;
  double concentration_term;  // sqrt(train_loss) * (0.5 (log n)^{3/2} R + sqrt(G' log(2/d)/n))
  double quadratic_term;      // 0.25 (log n)^3 R^2
  double tail_term;           // G' log(2/d) / n
};

// Explicit-constant evaluation (all logs natural, constant slack 1).
GenBoundResult eval_generalization_bound(const GenBoundInputs& in);

// Population-level descent objective:
// 3 * eta * T * (2 * population_risk + 7 * worst_loss * log(2/delta) / (6n))
//   + squared_distance.
double eval_population_objective(double population_risk, double worst_loss, double delta,
                                 double n, double step_size, int steps,
                                 double squared_distance);

// Loss-range constant for the shifted class: 2 * worst_loss
//   + depth^4 * log(width) * population_objective.
double g_prime_constant(double worst_loss, int depth, int width, double population_objective);

}  // namespace ntklab
