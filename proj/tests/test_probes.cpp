#include <doctest.h>

#include <cmath>
#include <ntklab/dataset.hpp>
#include <ntklab/margin.hpp>
#include <set>
#include <ntklab/errors.hpp>
#include <ntklab/network.hpp>
#include <ntklab/probes.hpp>
#include <ntklab/trainer.hpp>

#include "oracles.hpp"

using namespace ntklab;

TEST_CASE("fit_power_law: exact recovery and input validation") {
  std::vector<std::pair<double, double>> xy;
  for (double x : {1.0, 2.0, 4.0, 8.0}) xy.emplace_back(x, 3.0 * std::pow(x, 0.75));
  PowerFit fit = fit_power_law(xy);
  CHECK(fit.exponent == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(std::exp(fit.intercept) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(fit.r2 == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(fit_power_law({{1.0, 1.0}}), ConfigError);
  CHECK_THROWS_AS(fit_power_law({{1.0, 1.0}, {2.0, -1.0}}), ConfigError);
}

TEST_CASE("flip probe: zero on identical nets, counts a forced flip") {
  NetworkParams init = init_symmetric({2, 8, 4, 1});
  LabeledDataset data = sphere_sample(4, 3, 2);
  ProbeReport same = flip_probe(init, init, data);
  CHECK(same.scalars.at("max_flips") == 0.0);

  // Flip the sign of one first-layer pre-activation for the first point.
  NetworkParams bent = init;
  double pre = dot(init.layers[0].row_span(2), data.point(0));
  for (std::size_t j = 0; j < 4; ++j)
    bent.layers[0](2, j) -= 2.0 * pre * data.point(0)[j];
  ProbeReport flipped = flip_probe(init, bent, data);
  CHECK(flipped.scalars.at("max_flips") >= 1.0);
  CHECK(flipped.series.count("flips_by_layer") == 1);
}

TEST_CASE("probes: inputs are never mutated") {
  NetworkParams init = init_symmetric({2, 8, 4, 7});
  NetworkParams pert = perturb_layers(init, 1.0, 3);
  LabeledDataset data = sphere_sample(4, 4, 9);
  NetworkParams init_copy = init;
  NetworkParams pert_copy = pert;
  Matrix points_copy = data.points;

  flip_probe(init, pert, data);
  drift_probe(init, pert, data);
  semi_smooth_probe(pert, init, data);
  grad_drift_probe(pert, init, data);

  for (std::size_t l = 0; l < init.layers.size(); ++l) {
    CHECK(init.layers[l] == init_copy.layers[l]);
    CHECK(pert.layers[l] == pert_copy.layers[l]);
  }
  CHECK(data.points == points_copy);
}

TEST_CASE("probes: reports are bit-identical across repeated calls") {
  ScalingSweep sw;
  sw.widths = {8, 16};
  sw.repeats = 2;
  sw.depth = 2;
  sw.input_dim = 4;
  sw.sample_count = 3;
  sw.radius = 1.0;
  sw.seed = 5;
  ProbeReport a = flip_sweep(sw);
  ProbeReport b = flip_sweep(sw);
  CHECK(a.scalars == b.scalars);
  CHECK(a.series.at("flips_vs_width") == b.series.at("flips_vs_width"));
}

TEST_CASE("drift probe: zero at zero radius, floor satisfied") {
  NetworkParams init = init_symmetric({2, 16, 5, 3});
  LabeledDataset data = sphere_sample(5, 4, 4);
  ProbeReport same = drift_probe(init, init, data);
  CHECK(same.scalars.at("max_drift") == 0.0);

  NetworkParams pert = perturb_layers(init, 1.5, 8);
  ProbeReport rep = drift_probe(init, pert, data);
  CHECK(rep.scalars.at("max_drift") > 0.0);
  CHECK(rep.scalars.at("last_layer_drift") + 1e-12 >=
        rep.scalars.at("output_drift_floor"));
}

TEST_CASE("drift doubling: requires widths {w, 2w}") {
  ScalingSweep sw;
  sw.widths = {8, 24};
  sw.repeats = 2;
  sw.input_dim = 4;
  sw.sample_count = 2;
  sw.seed = 1;
  CHECK_THROWS_AS(drift_doubling(sw), ConfigError);
  sw.widths = {8, 16};
  ProbeReport rep = drift_doubling(sw);
  CHECK(rep.scalars.at("median_ratio") > 0.0);
}

TEST_CASE("lipschitz probe: prefix-stable point stream") {
  NetworkParams init = init_symmetric({2, 64, 6, 11});
  ProbeReport small = lipschitz_probe(init, 1.5, 5, 2, 3);
  ProbeReport big = lipschitz_probe(init, 1.5, 12, 2, 3);
  CHECK(big.scalars.at("constant") >= small.scalars.at("constant"));
  CHECK_THROWS_AS(lipschitz_probe(init, 0.5, 5, 2, 3), ConfigError);  // radius < 1
}

TEST_CASE("semi-smooth probe: zero residual against itself") {
  NetworkParams w = perturb_layers(init_symmetric({2, 16, 5, 2}), 1.0, 4);
  LabeledDataset data = sphere_sample(5, 4, 5);
  ProbeReport rep = semi_smooth_probe(w, w, data);
  CHECK(rep.scalars.at("max_residual") == 0.0);
}

TEST_CASE("semi-smooth residual: shrinks for closer parameter pairs") {
  NetworkParams init = init_symmetric({2, 64, 5, 6});
  LabeledDataset data = sphere_sample(5, 6, 7);
  NetworkParams far = perturb_layers(init, 2.0, 8);
  NetworkParams near = perturb_layers(init, 0.02, 8);
  double rf = semi_smooth_probe(far, init, data).scalars.at("max_residual");
  double rn = semi_smooth_probe(near, init, data).scalars.at("max_residual");
  CHECK(rn < rf);
}

TEST_CASE("grad drift probe: zero against itself, positive after a perturbation") {
  NetworkParams init = init_symmetric({3, 16, 4, 9});
  LabeledDataset data = sphere_sample(4, 3, 1);
  CHECK(grad_drift_probe(init, init, data).scalars.at("max_grad_drift") == 0.0);
  NetworkParams pert = perturb_layers(init, 1.0, 2);
  CHECK(grad_drift_probe(pert, init, data).scalars.at("max_grad_drift") > 0.0);
}

TEST_CASE("descent probe: scalar definitions on a short run") {
  XorSpec spec;
  spec.dim = 5;
  spec.seed = 4;
  LabeledDataset data = xor_sample(spec, 10);
  NetworkParams init = init_symmetric({1, 64, 5, 5});
  MarginCertificate cert = solve_margin(tangent_features(init, data), 1e-10);
  REQUIRE(cert.gamma > 0.0);
  ReferenceModel ref = build_reference(init, cert, data, 30);
  TrainConfig tc;
  tc.step_size = 0.1;
  tc.steps = 30;
  tc.snapshot_every = 1;
  Trajectory traj = train(init, data, tc, &ref.params);
  ProbeReport rep = descent_probe(traj, ref.params, data, tc.step_size);
  CHECK(rep.scalars.at("epsilon") ==
        doctest::Approx(0.01 * tc.step_size * traj.rows[0].train_loss).epsilon(1e-12));
  CHECK(rep.scalars.at("objective") ==
        doctest::Approx(eval_F_S(ref.params, init, data, tc.step_size, tc.steps).value)
            .epsilon(1e-12));
  CHECK(rep.scalars.at("fraction_satisfied") >= 0.0);
  CHECK(rep.scalars.at("fraction_satisfied") <= 1.0);
  CHECK(rep.scalars.at("invariant_max_ratio") > 0.0);
}

TEST_CASE("descent probe: needs densely snapshotted trajectories") {
  XorSpec spec;
  spec.dim = 4;
  spec.seed = 1;
  LabeledDataset data = xor_sample(spec, 6);
  NetworkParams init = init_symmetric({1, 16, 4, 2});
  TrainConfig tc;
  tc.step_size = 0.1;
  tc.steps = 10;
  tc.snapshot_every = 4;  // gaps
  Trajectory traj = train(init, data, tc);
  CHECK_THROWS_AS(descent_probe(traj, init, data, tc.step_size), ConfigError);
}

TEST_CASE("init norm probe: small-net smoke with sane scalars") {
  NetworkParams init = init_symmetric({3, 32, 5, 13});
  LabeledDataset data = sphere_sample(5, 6, 14);
  ProbeReport rep = init_norm_probe(init, data, 1e-8, 2);
  CHECK(rep.scalars.at("max_spectral_ratio") > 0.0);
  CHECK(rep.scalars.at("hidden_sq_min") > 0.0);
  CHECK(rep.scalars.at("hidden_sq_max") >= rep.scalars.at("hidden_sq_min"));
  CHECK(rep.scalars.at("max_last_layer_grad") > 0.0);
  CHECK(rep.scalars.count("max_product_ratio") == 1);
}

TEST_CASE("gaussian indicator: estimate near the closed form") {
  ProbeReport rep = gaussian_indicator_check(6, 20000, 3);
  CHECK(rep.scalars.at("exact") == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(rep.scalars.at("abs_error") < 0.03);
  CHECK_THROWS_AS(gaussian_indicator_check(6, 5000, 3), ConfigError);

  std::vector<double> c{1.0, 0.0}, b{3.0, 4.0};
  double est = gaussian_indicator_estimate(c, b, 40000, 9);
  CHECK(est == doctest::Approx(0.5 * 25.0).epsilon(0.05));
}

TEST_CASE("sign vectors: sampling and enumeration") {
  auto sampled = sample_sign_vectors(6, 40, 8);
  REQUIRE(sampled.size() == 40);
  for (const auto& e : sampled) {
    REQUIRE(e.size() == 6);
    for (double v : e) CHECK(std::fabs(v) == 1.0);
  }
  CHECK(sample_sign_vectors(6, 40, 8) == sampled);

  auto all = all_sign_vectors(4);
  REQUIRE(all.size() == 16);
  std::set<std::vector<double>> uniq(all.begin(), all.end());
  CHECK(uniq.size() == 16);
  CHECK_THROWS_AS(all_sign_vectors(21), ConfigError);
}

TEST_CASE("rademacher linearized: matches the materialized enumeration") {
  NetworkConfig nc{2, 12, 4, 3};
  NetworkParams init = init_symmetric(nc);
  LabeledDataset data = sphere_sample(4, 5, 6);
  auto signs = all_sign_vectors(5);
  const double radius = 1.7;
  ProbeReport rep = rademacher_linearized(init, data, radius, signs);
  double ref = oracle::materialized_rademacher_mean(init, data, radius, signs);
  CHECK(std::fabs(rep.scalars.at("estimate") - ref) <= 1e-10);
  CHECK(rep.scalars.at("shape_bound") > 0.0);
}

TEST_CASE("rademacher iterates: exactly zero on an init-only trajectory") {
  NetworkParams init = init_symmetric({2, 16, 5, 9});
  LabeledDataset data = sphere_sample(5, 6, 2);
  Trajectory traj;
  traj.add_snapshot(init, 0);
  ProbeReport rep = rademacher_iterates(traj, data, sample_sign_vectors(6, 32, 4));
  CHECK(rep.scalars.at("estimate") == 0.0);
}

TEST_CASE("generalization bound: term-by-term arithmetic") {
  GenBoundInputs in{0.36, 0.2, 3.0, 25.0, 0.05};
  GenBoundResult out = eval_generalization_bound(in);
  double log_n = std::log(25.0);
  double tail = 3.0 * std::log(2.0 / 0.05) / 25.0;
  CHECK(out.tail_term == doctest::Approx(tail).epsilon(1e-15));
  CHECK(out.concentration_term ==
        doctest::Approx(0.6 * (0.5 * std::pow(log_n, 1.5) * 0.2 + std::sqrt(tail)))
            .epsilon(1e-15));
  CHECK(out.quadratic_term ==
        doctest::Approx(0.25 * std::pow(log_n, 3.0) * 0.04).epsilon(1e-15));
  CHECK(out.value ==
        doctest::Approx(out.concentration_term + out.quadratic_term + out.tail_term)
            .epsilon(1e-15));
  CHECK_THROWS_AS(eval_generalization_bound({0.1, 0.1, 1.0, 1.0, 0.5}), ConfigError);
  CHECK_THROWS_AS(eval_generalization_bound({-0.1, 0.1, 1.0, 25.0, 0.5}), ConfigError);
}

TEST_CASE("population objective and loss-range constant: formulas") {
  double pop = eval_population_objective(0.3, 0.7, 0.01, 20.0, 0.1, 100, 4.0);
  CHECK(pop == doctest::Approx(3.0 * 0.1 * 100 *
                                   (2.0 * 0.3 + 7.0 * 0.7 * std::log(200.0) / (6.0 * 20.0)) +
                               4.0)
                   .epsilon(1e-15));
  double gp = g_prime_constant(0.7, 2, 64, pop);
  CHECK(gp == doctest::Approx(2.0 * 0.7 + 16.0 * std::log(64.0) * pop).epsilon(1e-15));
}

TEST_CASE("flip sweep: small grid has the documented shape") {
  ScalingSweep sw;
  sw.widths = {16, 32, 64};
  sw.repeats = 3;
  sw.depth = 2;
  sw.input_dim = 4;
  sw.sample_count = 4;
  sw.radius = 1.0;
  sw.seed = 2;
  ProbeReport rep = flip_sweep(sw);
  REQUIRE(rep.series.at("flips_vs_width").size() == 3);
  CHECK(rep.fit.has_value());
  CHECK(rep.scalars.count("exponent") == 1);
  for (const auto& [w, flips] : rep.series.at("flips_vs_width"))
    CHECK(flips <= w);  // cannot flip more units than exist
}

TEST_CASE("scaling sweeps: medians decrease on a coarse grid") {
  ScalingSweep sw;
  sw.widths = {32, 256};
  sw.repeats = 6;
  sw.depth = 2;
  sw.input_dim = 4;
  sw.sample_count = 4;
  sw.radius = 2.0;
  sw.seed = 3;
  ProbeReport ss = semi_smooth_sweep(sw);
  const auto& med = ss.series.at("median_vs_width");
  REQUIRE(med.size() == 2);
  CHECK(med[1].second < med[0].second);

  sw.radius = 1.0;
  ProbeReport gd = grad_drift_sweep(sw);
  const auto& gmed = gd.series.at("median_vs_width");
  REQUIRE(gmed.size() == 2);
  CHECK(gmed[1].second < gmed[0].second);
}
