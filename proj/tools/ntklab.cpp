// Command-line front end: train, xor-sweep, margin, probe, report.
// Exit codes: 0 success, 2 config error, 3 numerical failure, 4 failed --check
// assertion. Every run directory ends with a manifest.json, also on failure.

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ntklab/errors.hpp"
#include "ntklab/experiments.hpp"
#include "ntklab/threading.hpp"

namespace {

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      seeds.push_back(std::stoull(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw ntklab::ConfigError("bad seed '" + cell + "' in --seeds (expected integers)");
    }
  }
  if (seeds.empty()) throw ntklab::ConfigError("--seeds was given but holds no seeds");
  return seeds;
}

ntklab::FlatConfig load_or_default(const std::string& path) {
  if (path.empty()) return ntklab::FlatConfig::parse("{}");
  return ntklab::FlatConfig::load(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "ntklab: wide-network training experiments, margin certificates and theory probes.\n"
      "Stable CSV schemas (17 significant digits):\n"
      "  trajectory*.csv  step,train_loss,dist_from_init,dist_from_ref,grad_norm\n"
      "  sweep.csv        n,d,d2_over_n,mean_test_error,std_test_error,seeds\n"
      "  <probe>.<series>.csv  x,y"};
  app.set_version_flag("--version", ntklab::kVersionString);
  app.require_subcommand(1);

  std::string config_path, seeds_text, out_dir = "runs";
  int threads = 0;
  bool plot = false, check = false;
  auto add_common = [&](CLI::App* sub, bool with_config) {
    if (with_config)
      sub->add_option("--config", config_path, "JSON config file, one flat object");
    sub->add_option("--out", out_dir, "output directory (default runs)");
    sub->add_option("--seeds", seeds_text, "comma-separated seeds, overrides the config");
    sub->add_option("--threads", threads,
                    "worker threads (default: NTKLAB_THREADS, then hardware)");
    sub->add_flag("--plot", plot, "also write SVG scatter plots per series");
    sub->add_flag("--check", check, "assert pass conditions; a failed assert exits 4");
  };

  CLI::App* train = app.add_subcommand(
      "train", "Full-batch GD on a generated dataset, with optional probes.\n"
               "Config keys: L, m, d, n, seed|seeds, eta, T, dataset (xor|sphere),\n"
               "snapshot_every, probes, margin_tol, rademacher_draws");
  add_common(train, true);

  CLI::App* sweep = app.add_subcommand(
      "xor-sweep", "Grid of parity runs; exact population error per cell.\n"
                   "Config keys: vary (n|d), values, n, d, seed|seeds, m, L, T, eta");
  add_common(sweep, true);

  CLI::App* margin = app.add_subcommand(
      "margin", "Margin certificate of the initialization features on a parity sample.\n"
                "Config keys: L, m, d, n, seed, tol, d_sweep, d_values");
  add_common(margin, true);

  std::string probe_name;
  CLI::App* probe = app.add_subcommand("probe", "Run one named probe with its defaults.");
  probe->add_option("name", probe_name, "probe name; an unknown name lists the catalog")
      ->required();
  add_common(probe, true);

  std::vector<std::string> manifest_args;
  CLI::App* report =
      app.add_subcommand("report", "Merge run manifests into one summary (+ summary.json).");
  report->add_option("manifests", manifest_args, "manifest.json paths");
  add_common(report, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (threads > 0) ntklab::set_thread_count(threads);
    ntklab::CommandOptions options;
    options.out_dir = out_dir;
    options.plots = plot;
    options.check = check;
    if (!seeds_text.empty()) options.seeds = parse_seed_list(seeds_text);

    if (train->parsed()) return ntklab::cmd_train(load_or_default(config_path), options).exit_code;
    if (sweep->parsed())
      return ntklab::cmd_xor_sweep(load_or_default(config_path), options).exit_code;
    if (margin->parsed())
      return ntklab::cmd_margin(load_or_default(config_path), options).exit_code;
    if (probe->parsed())
      return ntklab::cmd_probe(probe_name, load_or_default(config_path), options).exit_code;
    if (report->parsed()) {
      std::vector<std::filesystem::path> paths(manifest_args.begin(), manifest_args.end());
      return ntklab::cmd_report(paths, options, std::cout);
    }
  } catch (const ntklab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ntklab::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
