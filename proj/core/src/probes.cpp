#include "ntklab/probes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ntklab/errors.hpp"
#include "ntklab/linalg.hpp"
#include "ntklab/loss.hpp"
#include "ntklab/rng.hpp"

namespace ntklab {

namespace {

double median(std::vector<double> v) {
  if (v.empty()) throw ConfigError("median of an empty set");
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void require_same_shape(const NetworkParams& a, const NetworkParams& b) {
  if (a.layers.size() != b.layers.size())
    throw ConfigError("parameter sets have different depths");
  for (std::size_t l = 0; l < a.layers.size(); ++l)
    if (a.layers[l].rows() != b.layers[l].rows() || a.layers[l].cols() != b.layers[l].cols())
      throw ConfigError("layer " + std::to_string(l + 1) + " shapes differ");
}

// flips <= m, errors in [0,1], norms >= 0: cheap report-level sanity gates.
void require_nonnegative(const ProbeReport& rep, const char* key) {
  auto it = rep.scalars.find(key);
  if (it != rep.scalars.end() && !(it->second >= 0.0))
    throw NumericalError(rep.name + ": " + key + " is negative or NaN");
}

std::uint64_t derived_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  return CounterRng(base).stream(a).stream(b).next_u64();
}

void set_config_meta(ProbeReport& rep, const NetworkConfig& cfg) {
  rep.meta["m"] = std::to_string(cfg.width);
  rep.meta["L"] = std::to_string(cfg.depth);
  rep.meta["d"] = std::to_string(cfg.input_dim);
  rep.meta["seed"] = std::to_string(cfg.seed);
}

double recorded_radius(const NetworkParams& init, const NetworkParams& perturbed) {
  std::vector<double> per_layer = layer_frobenius_distances(init, perturbed);
  return per_layer.empty() ? 0.0 : *std::max_element(per_layer.begin(), per_layer.end());
}

}  // namespace

PowerFit fit_power_law(const std::vector<std::pair<double, double>>& xy) {
  if (xy.size() < 2) throw ConfigError("power-law fit needs at least 2 points");
  std::vector<double> lx, ly;
  for (auto [x, y] : xy) {
    if (!(x > 0.0) || !(y > 0.0))
      throw ConfigError("power-law fit needs strictly positive coordinates");
    lx.push_back(std::log(x));
    ly.push_back(std::log(y));
  }
  double n = static_cast<double>(lx.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw ConfigError("power-law fit is degenerate (all x equal)");
  PowerFit fit;
  fit.exponent = (n * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.exponent * sx) / n;
  double ss_res = 0, ss_tot = 0, mean_y = sy / n;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    double pred = fit.exponent * lx[i] + fit.intercept;
    ss_res += (ly[i] - pred) * (ly[i] - pred);
    ss_tot += (ly[i] - mean_y) * (ly[i] - mean_y);
  }
  fit.r2 = ss_tot == 0.0 ? 1.0 : 1.0 - ss_res / ss_tot;
  if (fit.r2 < 0.0) fit.r2 = 0.0;
  return fit;
}

// --- activation geometry ------------------------------------------------

ProbeReport flip_probe(const NetworkParams& init, const NetworkParams& perturbed,
                       const LabeledDataset& data) {
  require_same_shape(init, perturbed);
  int depth = init.config.depth;
  ProbeReport rep;
  rep.name = "flip";
  set_config_meta(rep, init.config);
  rep.meta["n"] = std::to_string(data.size());
  rep.meta["radius"] = std::to_string(recorded_radius(init, perturbed));

  std::vector<double> layer_max(depth, 0.0);
  ActivationTrace t0, t1;
  for (std::size_t i = 0; i < data.size(); ++i) {
    forward_with_trace(init, data.point(i), t0, InputCheck::relaxed);
    forward_with_trace(perturbed, data.point(i), t1, InputCheck::relaxed);
    for (int l = 0; l < depth; ++l) {
      double flips = 0.0;
      for (std::size_t r = 0; r < t0.active[l].size(); ++r)
        if (t0.active[l][r] != t1.active[l][r]) flips += 1.0;
      layer_max[l] = std::max(layer_max[l], flips);
    }
  }
  double max_layer = 0.0;
  for (int l = 0; l < depth; ++l) {
    if (layer_max[l] > static_cast<double>(init.config.width))
      throw NumericalError("flip count exceeds the layer width");
    rep.series["flips_by_layer"].emplace_back(l + 1, layer_max[l]);
    max_layer = std::max(max_layer, layer_max[l]);
  }
  rep.scalars["max_flips"] = max_layer;
  require_nonnegative(rep, "max_flips");
  return rep;
}

ProbeReport flip_sweep(const ScalingSweep& sweep) {
  if (sweep.widths.size() < 2) throw ConfigError("sweep needs at least 2 widths");
  if (!std::is_sorted(sweep.widths.begin(), sweep.widths.end()))
    throw ConfigError("sweep widths must be increasing");
  if (sweep.repeats < 1) throw ConfigError("sweep repeats must be >= 1");

  ProbeReport rep;
  rep.name = "flip_sweep";
  rep.meta["L"] = std::to_string(sweep.depth);
  rep.meta["d"] = std::to_string(sweep.input_dim);
  rep.meta["n"] = std::to_string(sweep.sample_count);
  rep.meta["radius"] = std::to_string(sweep.radius);
  rep.meta["repeats"] = std::to_string(sweep.repeats);
  rep.meta["seed"] = std::to_string(sweep.seed);

  // Overshoot factor for the row edits: each targeted pre-activation is pushed
  // past zero by this relative margin so the sign change survives roundoff.
  const double kOvershoot = 0.1;

  for (std::size_t wi = 0; wi < sweep.widths.size(); ++wi) {
    int m = sweep.widths[wi];
    LabeledDataset data = sphere_sample(sweep.input_dim, sweep.sample_count,
                                        derived_seed(sweep.seed, 100 + wi, 0));
    std::vector<double> vals;
    for (int r = 0; r < sweep.repeats; ++r) {
      NetworkConfig cfg{sweep.depth, m, sweep.input_dim, derived_seed(sweep.seed, wi, 2 * r)};
      NetworkParams init = init_symmetric(cfg);
      double mean_flips = 0.0;
      for (std::size_t i = 0; i < data.size(); ++i) {
        std::span<const double> x = data.point(i);
        std::vector<double> pre(static_cast<std::size_t>(m));
        matvec(init.layers[0], x, pre);
        std::vector<std::size_t> order(pre.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
          return std::fabs(pre[a]) < std::fabs(pre[b]);
        });
        // Spend the squared radius on the cheapest sign changes first. The edit
        // for row r is -(1+o) pre_r x^T, so its Frobenius cost is (1+o)|pre_r|
        // on a unit-norm input.
        NetworkParams pert = init;
        double budget = sweep.radius * sweep.radius;
        for (std::size_t row : order) {
          double cost = (1.0 + kOvershoot) * std::fabs(pre[row]);
          if (cost * cost > budget) break;
          budget -= cost * cost;
          double* w = pert.layers[0].row(row);
          for (std::size_t j = 0; j < x.size(); ++j) w[j] -= (1.0 + kOvershoot) * pre[row] * x[j];
        }
        ActivationTrace before, after;
        forward_with_trace(init, x, before, InputCheck::relaxed);
        forward_with_trace(pert, x, after, InputCheck::relaxed);
        double flips = 0.0;
        for (std::size_t row = 0; row < before.active[0].size(); ++row)
          if (before.active[0][row] != after.active[0][row]) flips += 1.0;
        if (flips > static_cast<double>(m)) throw NumericalError("flip count exceeds the layer width");
        mean_flips += flips;
      }
      vals.push_back(mean_flips / static_cast<double>(data.size()));
    }
    rep.series["flips_vs_width"].emplace_back(static_cast<double>(m), median(vals));
  }
  rep.fit = fit_power_law(rep.series.at("flips_vs_width"));
  rep.scalars["exponent"] = rep.fit->exponent;
  rep.scalars["r2"] = rep.fit->r2;
  if (rep.fit->r2 < 0.7) rep.flags.push_back("low_r2");
  return rep;
}

ProbeReport drift_probe(const NetworkParams& init, const NetworkParams& perturbed,
                        const LabeledDataset& data) {
  require_same_shape(init, perturbed);
  int depth = init.config.depth;
  ProbeReport rep;
  rep.name = "drift";
  set_config_meta(rep, init.config);
  rep.meta["n"] = std::to_string(data.size());
  rep.meta["radius"] = std::to_string(recorded_radius(init, perturbed));

  std::vector<double> layer_max(depth, 0.0);
  double floor = 0.0;  // max_i |f - f_init| / sqrt(m): Cauchy-Schwarz with ||a|| = sqrt(m)
  double sqrt_m = std::sqrt(static_cast<double>(init.config.width));
  ActivationTrace t0, t1;
  for (std::size_t i = 0; i < data.size(); ++i) {
    double f0 = forward_with_trace(init, data.point(i), t0, InputCheck::relaxed);
    double f1 = forward_with_trace(perturbed, data.point(i), t1, InputCheck::relaxed);
    for (int l = 1; l <= depth; ++l) {
      long double acc = 0.0L;
      for (std::size_t r = 0; r < t0.h[l].size(); ++r) {
        long double d = static_cast<long double>(t1.h[l][r]) - t0.h[l][r];
        acc += d * d;
      }
      layer_max[l - 1] = std::max(layer_max[l - 1], std::sqrt(static_cast<double>(acc)));
    }
    floor = std::max(floor, std::abs(f1 - f0) / sqrt_m);
  }
  double max_drift = 0.0;
  for (int l = 0; l < depth; ++l) {
    rep.series["drift_by_layer"].emplace_back(l + 1, layer_max[l]);
    max_drift = std::max(max_drift, layer_max[l]);
  }
  rep.scalars["max_drift"] = max_drift;
  rep.scalars["last_layer_drift"] = layer_max[depth - 1];
  rep.scalars["output_drift_floor"] = floor;
  require_nonnegative(rep, "max_drift");
  return rep;
}

ProbeReport drift_doubling(const ScalingSweep& sweep) {
  if (sweep.widths.size() != 2 || sweep.widths[1] != 2 * sweep.widths[0])
    throw ConfigError("drift doubling needs widths {w, 2w}");
  if (sweep.repeats < 1) throw ConfigError("sweep repeats must be >= 1");

  ProbeReport rep;
  rep.name = "drift_doubling";
  rep.meta["L"] = std::to_string(sweep.depth);
  rep.meta["d"] = std::to_string(sweep.input_dim);
  rep.meta["n"] = std::to_string(sweep.sample_count);
  rep.meta["radius"] = std::to_string(sweep.radius);
  rep.meta["repeats"] = std::to_string(sweep.repeats);
  rep.meta["seed"] = std::to_string(sweep.seed);

  std::vector<double> ratios;
  for (int r = 0; r < sweep.repeats; ++r) {
    double drift[2];
    for (int wi = 0; wi < 2; ++wi) {
      int m = sweep.widths[wi];
      LabeledDataset data = sphere_sample(sweep.input_dim, sweep.sample_count,
                                          derived_seed(sweep.seed, 100 + wi, 0));
      NetworkConfig cfg{sweep.depth, m, sweep.input_dim, derived_seed(sweep.seed, wi, 2 * r)};
      NetworkParams init = init_symmetric(cfg);
      NetworkParams pert =
          perturb_layers(init, sweep.radius, derived_seed(sweep.seed, wi, 2 * r + 1));
      drift[wi] = drift_probe(init, pert, data).scalars.at("max_drift");
    }
    if (drift[0] <= 0.0) throw NumericalError("zero drift at the base width");
    ratios.push_back(drift[1] / drift[0]);
    rep.series["ratio_by_repeat"].emplace_back(r + 1, ratios.back());
  }
  rep.scalars["median_ratio"] = median(ratios);
  require_nonnegative(rep, "median_ratio");
  return rep;
}

ProbeReport lipschitz_probe(const NetworkParams& init, double radius, int n_points,
                            int n_perturbations, std::uint64_t seed) {
  if (!(radius >= 1.0))
    throw ConfigError("hidden-drift constant is calibrated for radius >= 1");
  if (n_points < 1 || n_perturbations < 1)
    throw ConfigError("need at least one point and one perturbation");
  int depth = init.config.depth;
  double m = static_cast<double>(init.config.width);
  double scale = std::sqrt(m) / (static_cast<double>(depth) * depth * radius * std::sqrt(std::log(m)));

  LabeledDataset data = sphere_sample(init.config.input_dim, n_points,
                                      derived_seed(seed, 1, 0));
  double worst = 0.0;
  for (int k = 0; k < n_perturbations; ++k) {
    NetworkParams pert = perturb_layers(init, radius, derived_seed(seed, 2, k));
    worst = std::max(worst, drift_probe(init, pert, data).scalars.at("max_drift"));
  }

  ProbeReport rep;
  rep.name = "lipschitz";
  set_config_meta(rep, init.config);
  rep.meta["n"] = std::to_string(n_points);
  rep.meta["perturbations"] = std::to_string(n_perturbations);
  rep.meta["radius"] = std::to_string(radius);
  rep.meta["estimate_kind"] = "sampled lower estimate of the sup";
  rep.scalars["max_drift"] = worst;
  rep.scalars["constant"] = worst * scale;
  require_nonnegative(rep, "constant");
  return rep;
}

// --- smoothness ---------------------------------------------------------

namespace {

// <df_w/dW, w - w_bar> without materializing anything: each layer gradient is
// the rank-one v_l h^{l-1 T}, so the contraction is v_l . (W_l - Wbar_l) h^{l-1}.
double first_order_term(const NetworkParams& w, const NetworkParams& w_bar,
                        const std::vector<std::vector<double>>& v, const ActivationTrace& trace) {
  long double acc = 0.0L;
  std::vector<double> u1, u2;
  for (std::size_t l = 0; l < w.layers.size(); ++l) {
    u1.assign(w.layers[l].rows(), 0.0);
    u2.assign(w.layers[l].rows(), 0.0);
    matvec(w.layers[l], trace.h[l], u1);
    matvec(w_bar.layers[l], trace.h[l], u2);
    for (std::size_t r = 0; r < u1.size(); ++r)
      acc += static_cast<long double>(v[l][r]) * (u1[r] - u2[r]);
  }
  return static_cast<double>(acc);
}

}  // namespace

ProbeReport semi_smooth_probe(const NetworkParams& w, const NetworkParams& w_bar,
                              const LabeledDataset& data) {
  require_same_shape(w, w_bar);
  ProbeReport rep;
  rep.name = "semi_smooth";
  set_config_meta(rep, w.config);
  rep.meta["n"] = std::to_string(data.size());

  std::vector<double> residuals;
  ActivationTrace trace;
  for (std::size_t i = 0; i < data.size(); ++i) {
    double f_w = forward_with_trace(w, data.point(i), trace, InputCheck::relaxed);
    double f_bar = forward(w_bar, data.point(i), InputCheck::relaxed);
    std::vector<std::vector<double>> v = backprop_vectors(w, trace);
    double lin = first_order_term(w, w_bar, v, trace);
    double res = std::abs(f_w - f_bar - lin);
    residuals.push_back(res);
    rep.series["residual_by_point"].emplace_back(static_cast<double>(i), res);
  }
  rep.scalars["max_residual"] = *std::max_element(residuals.begin(), residuals.end());
  rep.scalars["median_residual"] = median(residuals);
  require_nonnegative(rep, "max_residual");
  return rep;
}

namespace {

ProbeReport width_sweep_median(const ScalingSweep& sweep, const std::string& name,
                               double (*cell)(const NetworkConfig&, const ScalingSweep&, int)) {
  if (sweep.widths.size() < 2) throw ConfigError("sweep needs at least 2 widths");
  if (!std::is_sorted(sweep.widths.begin(), sweep.widths.end()))
    throw ConfigError("sweep widths must be increasing");
  if (sweep.repeats < 1) throw ConfigError("sweep repeats must be >= 1");

  ProbeReport rep;
  rep.name = name;
  rep.meta["L"] = std::to_string(sweep.depth);
  rep.meta["d"] = std::to_string(sweep.input_dim);
  rep.meta["n"] = std::to_string(sweep.sample_count);
  rep.meta["radius"] = std::to_string(sweep.radius);
  rep.meta["repeats"] = std::to_string(sweep.repeats);
  rep.meta["seed"] = std::to_string(sweep.seed);

  std::vector<double> medians;
  for (std::size_t wi = 0; wi < sweep.widths.size(); ++wi) {
    std::vector<double> vals;
    for (int r = 0; r < sweep.repeats; ++r) {
      NetworkConfig cfg{sweep.depth, sweep.widths[wi], sweep.input_dim,
                        derived_seed(sweep.seed, wi, 3 * r)};
      vals.push_back(cell(cfg, sweep, r));
    }
    medians.push_back(median(vals));
    rep.series["median_vs_width"].emplace_back(static_cast<double>(sweep.widths[wi]),
                                               medians.back());
  }
  bool decreasing = true;
  for (std::size_t i = 1; i < medians.size(); ++i)
    if (!(medians[i] < medians[i - 1])) decreasing = false;
  if (!decreasing) rep.flags.push_back("not_monotone");
  bool positive = std::all_of(medians.begin(), medians.end(), [](double v) { return v > 0.0; });
  if (positive) {
    rep.fit = fit_power_law(rep.series.at("median_vs_width"));
    rep.scalars["exponent"] = rep.fit->exponent;
    rep.scalars["r2"] = rep.fit->r2;
    if (rep.fit->r2 < 0.7) rep.flags.push_back("low_r2");
  }
  return rep;
}

}  // namespace

ProbeReport semi_smooth_sweep(const ScalingSweep& sweep) {
  return width_sweep_median(sweep, "semi_smooth_sweep",
                            [](const NetworkConfig& cfg, const ScalingSweep& sw, int r) {
                              NetworkParams init = init_symmetric(cfg);
                              // fresh init per pair; the two ends are independent
                              // perturbations inside the same radius ball
                              std::size_t wi = 0;
                              while (sw.widths[wi] != cfg.width) ++wi;
                              NetworkParams a = perturb_layers(
                                  init, sw.radius, derived_seed(sw.seed, 10 + wi, 3 * r + 1));
                              NetworkParams b = perturb_layers(
                                  init, sw.radius, derived_seed(sw.seed, 10 + wi, 3 * r + 2));
                              LabeledDataset data = sphere_sample(
                                  cfg.input_dim, sw.sample_count, derived_seed(sw.seed, 100, 0));
                              return semi_smooth_probe(a, b, data).scalars.at("max_residual");
                            });
}

ProbeReport grad_drift_probe(const NetworkParams& w, const NetworkParams& ref,
                             const LabeledDataset& data) {
  require_same_shape(w, ref);
  int depth = w.config.depth;
  ProbeReport rep;
  rep.name = "grad_drift";
  set_config_meta(rep, w.config);
  rep.meta["n"] = std::to_string(data.size());

  std::vector<double> layer_max(depth, 0.0);
  ActivationTrace ta, tb;
  for (std::size_t i = 0; i < data.size(); ++i) {
    forward_with_trace(w, data.point(i), ta, InputCheck::relaxed);
    forward_with_trace(ref, data.point(i), tb, InputCheck::relaxed);
    std::vector<std::vector<double>> va = backprop_vectors(w, ta);
    std::vector<std::vector<double>> vb = backprop_vectors(ref, tb);
    for (int l = 0; l < depth; ++l) {
      // || u a^T - v b^T ||_F^2 = |u|^2|a|^2 - 2 <u,v><a,b> + |v|^2|b|^2
      double uu = squared_norm(va[l]) * squared_norm(ta.h[l]);
      double vv = squared_norm(vb[l]) * squared_norm(tb.h[l]);
      double uv = dot(va[l], vb[l]) * dot(ta.h[l], tb.h[l]);
      double sq = std::max(uu - 2.0 * uv + vv, 0.0);
      layer_max[l] = std::max(layer_max[l], std::sqrt(sq));
    }
  }
  double worst = 0.0;
  for (int l = 0; l < depth; ++l) {
    rep.series["grad_drift_by_layer"].emplace_back(l + 1, layer_max[l]);
    worst = std::max(worst, layer_max[l]);
  }
  rep.scalars["max_grad_drift"] = worst;
  require_nonnegative(rep, "max_grad_drift");
  return rep;
}

ProbeReport grad_drift_sweep(const ScalingSweep& sweep) {
  return width_sweep_median(sweep, "grad_drift_sweep",
                            [](const NetworkConfig& cfg, const ScalingSweep& sw, int r) {
                              NetworkParams init = init_symmetric(cfg);
                              std::size_t wi = 0;
                              while (sw.widths[wi] != cfg.width) ++wi;
                              NetworkParams pert = perturb_layers(
                                  init, sw.radius, derived_seed(sw.seed, 10 + wi, 3 * r + 1));
                              LabeledDataset data = sphere_sample(
                                  cfg.input_dim, sw.sample_count, derived_seed(sw.seed, 100, 0));
                              return grad_drift_probe(pert, init, data)
                                  .scalars.at("max_grad_drift");
                            });
}

// --- descent ------------------------------------------------------------

ProbeReport descent_probe(const Trajectory& traj, const NetworkParams& reference,
                          const LabeledDataset& data, double step_size) {
  std::size_t count = traj.snapshot_count();
  if (count < 2) throw ConfigError("descent probe needs at least 2 snapshots");
  for (std::size_t i = 0; i < count; ++i)
    if (traj.snapshot_step(i) != static_cast<int>(i))
      throw ConfigError("descent probe needs dense snapshots (snapshot_every = 1)");
  if (!(step_size > 0.0)) throw ConfigError("step_size must be > 0");

  std::vector<double> dist_sq(count), risk(count);
  for (std::size_t t = 0; t < count; ++t) {
    NetworkParams w = traj.snapshot(t);
    dist_sq[t] = squared_frobenius_distance(w, reference);
    risk[t] = empirical_risk(w, data);
  }
  double risk_ref = empirical_risk(reference, data);
  int horizon = traj.snapshot_step(count - 1);
  double objective =
      3.0 * step_size * static_cast<double>(horizon) * risk_ref + dist_sq[0];
  double epsilon = 0.01 * step_size * risk[0];

  ProbeReport rep;
  rep.name = "descent";
  set_config_meta(rep, reference.config);
  rep.meta["n"] = std::to_string(data.size());
  rep.meta["step"] = std::to_string(horizon);

  std::size_t satisfied = 0;
  for (std::size_t t = 0; t + 1 < count; ++t) {
    double s = dist_sq[t] - dist_sq[t + 1] - step_size * risk[t] + 3.0 * step_size * risk_ref;
    if (s >= -epsilon) ++satisfied;
    rep.series["descent_slack"].emplace_back(static_cast<double>(t), s);
  }
  long double partial = 0.0L;
  double max_ratio = 0.0;
  for (std::size_t t = 0; t < count; ++t) {
    double lhs = dist_sq[t] + static_cast<double>(partial) * step_size;
    max_ratio = std::max(max_ratio, lhs / objective);
    rep.series["invariant_ratio"].emplace_back(static_cast<double>(t), lhs / objective);
    partial += risk[t];
  }

  rep.scalars["fraction_satisfied"] =
      static_cast<double>(satisfied) / static_cast<double>(count - 1);
  rep.scalars["epsilon"] = epsilon;
  rep.scalars["objective"] = objective;
  rep.scalars["invariant_max_ratio"] = max_ratio;
  rep.scalars["reference_risk"] = risk_ref;
  require_nonnegative(rep, "fraction_satisfied");
  return rep;
}

// --- initialization norms -----------------------------------------------

ProbeReport init_norm_probe(const NetworkParams& init, const LabeledDataset& data,
                            double spectral_tol, int product_points) {
  init.config.validate();
  if (data.size() == 0) throw ConfigError("init norm probe needs sample points");
  int depth = init.config.depth;
  double m = static_cast<double>(init.config.width);
  double sqrt_m = std::sqrt(m);
  double scale = std::sqrt(2.0 / m);

  ProbeReport rep;
  rep.name = "init_norm";
  set_config_meta(rep, init.config);
  rep.meta["n"] = std::to_string(data.size());
  rep.meta["spectral_tol"] = std::to_string(spectral_tol);
  rep.meta["c0"] = "3";

  double max_spectral_ratio = 0.0;
  for (int l = 1; l <= depth; ++l) {
    SpectralEstimate est = spectral_norm_estimate(init.layers[l - 1], spectral_tol);
    if (!est.converged) rep.flags.push_back("spectral_unconverged_layer_" + std::to_string(l));
    rep.series["spectral_over_sqrt_m"].emplace_back(l, est.value / sqrt_m);
    max_spectral_ratio = std::max(max_spectral_ratio, est.value / sqrt_m);
  }
  rep.scalars["max_spectral_ratio"] = max_spectral_ratio;

  double band_lo = std::numeric_limits<double>::infinity();
  double band_hi = 0.0;
  double max_last_grad = 0.0;
  ActivationTrace trace;
  std::vector<double> masked(init.config.width);
  for (std::size_t i = 0; i < data.size(); ++i) {
    forward_with_trace(init, data.point(i), trace);
    for (int l = 1; l <= depth; ++l) {
      double sq = squared_norm(trace.h[l]);
      band_lo = std::min(band_lo, sq);
      band_hi = std::max(band_hi, sq);
    }
    // last-layer gradient is rank-one: sqrt(2/m) (active ⊙ signs) h^{L-1 T}
    for (int r = 0; r < init.config.width; ++r)
      masked[r] = trace.active[depth - 1][r] ? scale * init.out_signs[r] : 0.0;
    max_last_grad =
        std::max(max_last_grad, norm(masked) * norm(trace.h[depth - 1]));
  }
  rep.scalars["hidden_sq_min"] = band_lo;
  rep.scalars["hidden_sq_max"] = band_hi;
  rep.scalars["max_last_layer_grad"] = max_last_grad;

  if (depth >= 2) {
    int pts = std::min<int>(product_points, static_cast<int>(data.size()));
    double norm_factor = static_cast<double>(depth) * std::sqrt(std::log(m));
    double max_ratio = 0.0;
    for (int i = 0; i < pts; ++i) {
      forward_with_trace(init, data.point(i), trace);
      for (int a = 2; a <= depth; ++a)
        for (int b = a; b <= depth; ++b) {
          SpectralEstimate est =
              product_operator_norm_estimate(init, trace, a, b, spectral_tol);
          if (!est.converged)
            rep.flags.push_back("product_unconverged_" + std::to_string(a) + "_" +
                                std::to_string(b));
          max_ratio = std::max(max_ratio, est.value / norm_factor);
        }
    }
    rep.scalars["max_product_ratio"] = max_ratio;
    rep.meta["product_points"] = std::to_string(pts);
  }
  require_nonnegative(rep, "max_spectral_ratio");
  return rep;
}

// --- statistical identities ----------------------------------------------

double gaussian_indicator_estimate(std::span<const double> c, std::span<const double> b,
                                   std::int64_t trials, std::uint64_t seed) {
  if (c.size() != b.size()) throw ConfigError("direction and vector dims differ");
  if (trials < 10000) throw ConfigError("need at least 10^4 trials");
  CounterRng root(seed);
  long double acc = 0.0L;
  std::vector<double> w(c.size());
  for (std::int64_t t = 0; t < trials; ++t) {
    CounterRng rng = root.stream(static_cast<std::uint64_t>(t));
    for (double& e : w) e = rng.next_gaussian();
    if (dot(w, c) >= 0.0) {
      double p = dot(w, b);
      acc += static_cast<long double>(p) * p;
    }
  }
  return static_cast<double>(acc / static_cast<long double>(trials));
}

ProbeReport gaussian_indicator_check(int dim, std::int64_t trials, std::uint64_t seed) {
  if (dim < 1) throw ConfigError("dim must be >= 1");
  CounterRng rng = CounterRng(seed).stream(77);
  std::vector<double> c(dim), b(dim);
  for (double& e : c) e = rng.next_gaussian();
  for (double& e : b) e = rng.next_gaussian();
  scale_in_place(b, 1.0 / norm(b));  // unit b, so the exact value is always 1/2
  double estimate = gaussian_indicator_estimate(c, b, trials, seed);
  double exact = 0.5 * squared_norm(b);

  ProbeReport rep;
  rep.name = "gaussian_indicator";
  rep.meta["d"] = std::to_string(dim);
  rep.meta["trials"] = std::to_string(trials);
  rep.meta["seed"] = std::to_string(seed);
  rep.scalars["estimate"] = estimate;
  rep.scalars["exact"] = exact;
  rep.scalars["abs_error"] = std::abs(estimate - exact);
  require_nonnegative(rep, "estimate");
  return rep;
}

std::vector<std::vector<double>> sample_sign_vectors(std::size_t n, int draws,
                                                     std::uint64_t seed) {
  if (draws < 1) throw ConfigError("need at least one sign draw");
  std::vector<std::vector<double>> out(draws, std::vector<double>(n));
  CounterRng root(seed);
  for (int k = 0; k < draws; ++k) {
    CounterRng rng = root.stream(static_cast<std::uint64_t>(k));
    for (std::size_t i = 0; i < n; ++i) out[k][i] = rng.next_sign();
  }
  return out;
}

std::vector<std::vector<double>> all_sign_vectors(std::size_t n) {
  if (n > 20) throw ConfigError("sign enumeration capped at n = 20");
  std::size_t total = std::size_t{1} << n;
  std::vector<std::vector<double>> out(total, std::vector<double>(n));
  for (std::size_t mask = 0; mask < total; ++mask)
    for (std::size_t i = 0; i < n; ++i) out[mask][i] = (mask >> i) & 1u ? 1.0 : -1.0;
  return out;
}

ProbeReport rademacher_linearized(const NetworkParams& init, const LabeledDataset& data,
                                  double ball_radius,
                                  const std::vector<std::vector<double>>& signs) {
  if (!(ball_radius >= 0.0)) throw ConfigError("ball radius must be >= 0");
  if (signs.empty()) throw ConfigError("need at least one sign vector");
  std::size_t n = data.size();
  for (const auto& e : signs)
    if (e.size() != n) throw ConfigError("sign vector length does not match the sample");

  // Per-sample gradients are rank-one per layer: df/dW^l = v_l h^{l-1 T}.
  // || sum_i e_i df_i/dW ||_F^2 then contracts to pairwise factor dots,
  // never materializing a weight-shaped block.
  int depth = init.config.depth;
  std::size_t m = static_cast<std::size_t>(init.config.width);
  std::vector<std::vector<std::vector<double>>> v(n), h(n);
  ActivationTrace trace;
  for (std::size_t i = 0; i < n; ++i) {
    forward_with_trace(init, data.point(i), trace);
    v[i] = backprop_vectors(init, trace);
    h[i] = trace.h;
  }
  std::vector<Matrix> gram(depth);
  for (int l = 0; l < depth; ++l) {
    gram[l] = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j)
        gram[l](i, j) = gram[l](j, i) = dot(v[i][l], v[j][l]) * dot(h[i][l], h[j][l]);
  }

  long double mean = 0.0L;
  for (const auto& e : signs) {
    long double sq = 0.0L;
    for (int l = 0; l < depth; ++l)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          sq += static_cast<long double>(e[i]) * e[j] * gram[l](i, j);
    double sup = ball_radius / static_cast<double>(n) *
                 std::sqrt(std::max(static_cast<double>(sq), 0.0));
    mean += sup;
  }
  double estimate = static_cast<double>(mean / static_cast<long double>(signs.size()));

  ProbeReport rep;
  rep.name = "rademacher_linearized";
  set_config_meta(rep, init.config);
  rep.meta["n"] = std::to_string(n);
  rep.meta["draws"] = std::to_string(signs.size());
  rep.scalars["estimate"] = estimate;
  double shape = ball_radius * static_cast<double>(depth) * depth *
                 std::sqrt(std::log(static_cast<double>(m)) / static_cast<double>(n));
  rep.scalars["shape_bound"] = shape;
  if (shape > 0.0) rep.scalars["shape_ratio"] = estimate / shape;
  require_nonnegative(rep, "estimate");
  return rep;
}

ProbeReport rademacher_iterates(const Trajectory& traj, const LabeledDataset& data,
                                const std::vector<std::vector<double>>& signs) {
  if (traj.snapshot_count() == 0) throw ConfigError("trajectory has no snapshots");
  if (signs.empty()) throw ConfigError("need at least one sign vector");
  std::size_t n = data.size();
  for (const auto& e : signs)
    if (e.size() != n) throw ConfigError("sign vector length does not match the sample");

  std::size_t count = traj.snapshot_count();
  std::vector<std::vector<double>> f(count, std::vector<double>(n));
  for (std::size_t t = 0; t < count; ++t) {
    NetworkParams w = traj.snapshot(t);
    for (std::size_t i = 0; i < n; ++i) f[t][i] = forward(w, data.point(i));
  }

  long double mean = 0.0L;
  for (const auto& e : signs) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < count; ++t) {
      long double acc = 0.0L;
      for (std::size_t i = 0; i < n; ++i) acc += static_cast<long double>(e[i]) * f[t][i];
      best = std::max(best, static_cast<double>(acc) / static_cast<double>(n));
    }
    mean += best;
  }

  ProbeReport rep;
  rep.name = "rademacher_iterates";
  rep.meta["n"] = std::to_string(n);
  rep.meta["draws"] = std::to_string(signs.size());
  rep.meta["snapshots"] = std::to_string(count);
  rep.meta["note"] =
      "lower estimate over recorded iterates; at full subsample size the worst-case "
      "complexity coincides with the plain one";
  rep.scalars["estimate"] = static_cast<double>(mean / static_cast<long double>(signs.size()));
  return rep;
}

// --- generalization bound evaluation -------------------------------------

GenBoundResult eval_generalization_bound(const GenBoundInputs& in) {
  if (!(in.n >= 2.0)) throw ConfigError("sample size must be >= 2");
  if (!(in.delta > 0.0 && in.delta < 1.0)) throw ConfigError("delta must be in (0,1)");
  if (!(in.train_loss >= 0.0) || !(in.rademacher >= 0.0) || !(in.g_prime >= 0.0))
    throw ConfigError("bound inputs must be nonnegative");
  double log_n = std::log(in.n);
  double tail = in.g_prime * std::log(2.0 / in.delta) / in.n;
  GenBoundResult out;
  out.concentration_term = std::sqrt(in.train_loss) *
                           (0.5 * std::pow(log_n, 1.5) * in.rademacher + std::sqrt(tail));
  out.quadratic_term = 0.25 * log_n * log_n * log_n * in.rademacher * in.rademacher;
  out.tail_term = tail;
  out.value = out.concentration_term + out.quadratic_term + out.tail_term;
  return out;
}

double eval_population_objective(double population_risk, double worst_loss, double delta,
                                 double n, double step_size, int steps,
                                 double squared_distance) {
  if (!(n >= 1.0)) throw ConfigError("sample size must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must be in (0,1)");
  return 3.0 * step_size * static_cast<double>(steps) *
             (2.0 * population_risk + 7.0 * worst_loss * std::log(2.0 / delta) / (6.0 * n)) +
         squared_distance;
}

double g_prime_constant(double worst_loss, int depth, int width, double population_objective) {
  double l4 = static_cast<double>(depth);
  l4 = l4 * l4 * l4 * l4;
  return 2.0 * worst_loss + l4 * std::log(static_cast<double>(width)) * population_objective;
}

}  // namespace ntklab
