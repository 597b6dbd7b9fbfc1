#include "ntklab/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "json.hpp"

#include "ntklab/checkpoint.hpp"
#include "ntklab/errors.hpp"
#include "ntklab/margin.hpp"
#include "ntklab/report.hpp"
#include "ntklab/rng.hpp"
#include "ntklab/trainer.hpp"

namespace ntklab {

namespace {

using Clock = std::chrono::steady_clock;

std::string g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string g6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::uint64_t sub_seed(std::uint64_t base, std::uint64_t tag) {
  return CounterRng(base).stream(tag).next_u64();
}

struct LinearFit {
  double slope = 0.0;
  double r2 = 0.0;
};

// Least squares through the origin: y ~= slope * x. r2 compares against the
// constant-mean baseline, so it goes negative when the origin line fits worse
// than a flat one — a useful failure signal for trend checks.
LinearFit origin_fit(const std::vector<std::pair<double, double>>& xy) {
  double sxy = 0, sxx = 0, sy = 0;
  for (auto [x, y] : xy) {
    sxy += x * y;
    sxx += x * x;
    sy += y;
  }
  LinearFit fit;
  if (sxx == 0.0 || xy.empty()) return fit;
  fit.slope = sxy / sxx;
  double mean_y = sy / static_cast<double>(xy.size());
  double ss_res = 0, ss_tot = 0;
  for (auto [x, y] : xy) {
    ss_res += (y - fit.slope * x) * (y - fit.slope * x);
    ss_tot += (y - mean_y) * (y - mean_y);
  }
  fit.r2 = ss_tot == 0.0 ? 0.0 : 1.0 - ss_res / ss_tot;
  return fit;
}

// Tracks one run directory: artifacts recorded after each successful write,
// manifest written exactly once, last, on both the success and failure paths.
class RunScope {
 public:
  RunScope(std::string command, const FlatConfig& cfg, const CommandOptions& options)
      : dir_(options.out_dir), start_(Clock::now()) {
    manifest_.command = std::move(command);
    manifest_.config_echo = cfg.echo();
    std::filesystem::create_directories(dir_);
  }

  const std::filesystem::path& dir() const { return dir_; }

  std::filesystem::path path_of(const std::string& name) const { return dir_ / name; }

  void artifact(const std::filesystem::path& p) {
    manifest_.artifacts.push_back(std::filesystem::relative(p, dir_).generic_string());
  }

  void note(std::string s) { manifest_.notes.push_back(std::move(s)); }
  void seeds(std::vector<std::uint64_t> s) { manifest_.seeds = std::move(s); }
  void timing(const std::string& key, Clock::time_point since) {
    manifest_.timings_sec[key] = std::chrono::duration<double>(Clock::now() - since).count();
  }

  // Check bookkeeping: failures flip the exit code to 4, never the status.
  void check(bool ok, const std::string& what) {
    if (ok) return;
    ++check_failures_;
    note("CHECK FAILED: " + what);
  }
  int check_failures() const { return check_failures_; }

  CommandOutcome finish() {
    timing("total", start_);
    write_manifest(manifest_, dir_);
    return {manifest_, check_failures_ > 0 ? 4 : 0};
  }

  void fail(const std::string& why) {
    manifest_.status = "failed";
    note(why);
    timing("total", start_);
    try {
      write_manifest(manifest_, dir_);
    } catch (...) {
      // best effort; the original error is the one worth surfacing
    }
  }

 private:
  std::filesystem::path dir_;
  Clock::time_point start_;
  RunManifest manifest_;
  int check_failures_ = 0;
};

std::vector<std::uint64_t> resolve_seeds(const FlatConfig& cfg, const CommandOptions& options,
                                         int default_count) {
  if (!options.seeds.empty()) return options.seeds;
  if (cfg.has("seeds")) {
    std::vector<std::uint64_t> s = cfg.seed_values("seeds");
    if (s.empty()) throw ConfigError("seeds must be a nonempty array");
    return s;
  }
  std::uint64_t base = cfg.seed_value("seed", 0);
  std::vector<std::uint64_t> s;
  for (int k = 0; k < default_count; ++k) s.push_back(base + static_cast<std::uint64_t>(k));
  return s;
}

std::string join_seeds(const std::vector<std::uint64_t>& seeds, char sep) {
  std::string out;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (i) out += sep;
    out += std::to_string(seeds[i]);
  }
  return out;
}

LabeledDataset make_dataset(const std::string& kind, int d, std::size_t n, std::uint64_t seed) {
  if (kind == "xor") {
    XorSpec spec;
    spec.dim = d;
    spec.seed = seed;
    return xor_sample(spec, n);
  }
  if (kind == "sphere") return sphere_sample(d, n, seed);
  throw ConfigError("unknown dataset '" + kind + "' (expected xor or sphere)");
}

void save_probe_artifacts(RunScope& run, const ProbeReport& rep, bool plots) {
  ReportFiles files = save_report(rep, run.dir(), plots);
  run.artifact(files.json);
  for (const auto& f : files.csv) run.artifact(f);
  for (const auto& f : files.svg) run.artifact(f);
}

bool contains_flag(const ProbeReport& rep, const std::string& flag) {
  return std::find(rep.flags.begin(), rep.flags.end(), flag) != rep.flags.end();
}

}  // namespace

// --- manifest -------------------------------------------------------------

std::filesystem::path write_manifest(const RunManifest& m, const std::filesystem::path& dir) {
  for (const std::string& a : m.artifacts)
    if (!std::filesystem::exists(dir / a))
      throw ConfigError("manifest lists a missing artifact: " + a);
  nlohmann::json j;
  j["command"] = m.command;
  j["config"] = m.config_echo;
  j["seeds"] = m.seeds;
  j["artifacts"] = m.artifacts;
  j["timings_sec"] = m.timings_sec;
  j["version"] = m.version;
  j["notes"] = m.notes;
  j["status"] = m.status;
  std::filesystem::path file = dir / "manifest.json";
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ConfigError("cannot open " + file.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw ConfigError("write failed for " + file.string());
  return file;
}

RunManifest load_manifest(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ConfigError("cannot open manifest " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("manifest " + file.string() + " is not valid JSON: " + e.what());
  }
  RunManifest m;
  try {
    m.command = j.at("command").get<std::string>();
    m.config_echo = j.at("config").get<std::string>();
    m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    m.artifacts = j.at("artifacts").get<std::vector<std::string>>();
    for (const auto& [k, v] : j.at("timings_sec").items()) m.timings_sec[k] = v.get<double>();
    m.version = j.at("version").get<std::string>();
    m.notes = j.at("notes").get<std::vector<std::string>>();
    m.status = j.at("status").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("manifest " + file.string() + " has a bad field: " + e.what());
  }
  if (m.status != "ok" && m.status != "failed")
    throw ConfigError("manifest status must be ok or failed, got " + m.status);
  return m;
}

// --- flat config ----------------------------------------------------------

FlatConfig FlatConfig::parse(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a single JSON object");
  FlatConfig cfg;
  for (const auto& [key, v] : j.items()) {
    Value val;
    if (v.is_number_unsigned()) {
      val.kind = Value::Kind::number;
      val.unum = v.get<std::uint64_t>();
      val.num = static_cast<double>(val.unum);
      val.exact_u64 = true;
    } else if (v.is_number()) {
      val.kind = Value::Kind::number;
      val.num = v.get<double>();
    } else if (v.is_boolean()) {
      val.kind = Value::Kind::boolean;
      val.truth = v.get<bool>();
    } else if (v.is_string()) {
      val.kind = Value::Kind::text;
      val.str = v.get<std::string>();
    } else if (v.is_array()) {
      bool any_string = false, any_number = false;
      for (const auto& e : v) {
        if (e.is_string())
          any_string = true;
        else if (e.is_number())
          any_number = true;
        else
          throw ConfigError("config key " + key + " has a non-scalar array element");
      }
      if (any_string && any_number)
        throw ConfigError("config key " + key + " mixes numbers and strings");
      if (any_string) {
        val.kind = Value::Kind::texts;
        for (const auto& e : v) val.strs.push_back(e.get<std::string>());
      } else {
        val.kind = Value::Kind::numbers;
        for (const auto& e : v) {
          if (e.is_number_unsigned()) {
            val.unums.push_back(e.get<std::uint64_t>());
            val.nums.push_back(static_cast<double>(val.unums.back()));
            val.elem_exact.push_back(1);
          } else {
            val.unums.push_back(0);
            val.nums.push_back(e.get<double>());
            val.elem_exact.push_back(0);
          }
        }
      }
    } else {
      throw ConfigError("config key " + key + " must be a scalar or a flat array");
    }
    cfg.entries_.emplace_back(key, std::move(val));
  }
  cfg.consumed_.assign(cfg.entries_.size(), 0);
  cfg.echo_ = j.dump();
  return cfg;
}

FlatConfig FlatConfig::load(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

const FlatConfig::Value* FlatConfig::find(const std::string& key) const {
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].first == key) {
      consumed_[i] = 1;
      return &entries_[i].second;
    }
  return nullptr;
}

bool FlatConfig::has(const std::string& key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return true;
  return false;
}

double FlatConfig::number(const std::string& key, double fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  if (v->kind != Value::Kind::number) throw ConfigError("config key " + key + " must be a number");
  return v->num;
}

int FlatConfig::integer(const std::string& key, int fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  if (v->kind != Value::Kind::number) throw ConfigError("config key " + key + " must be a number");
  double r = std::round(v->num);
  if (std::abs(v->num - r) > 1e-9 || std::abs(r) > 2147483647.0)
    throw ConfigError("config key " + key + " must be an integer");
  return static_cast<int>(r);
}

std::uint64_t FlatConfig::seed_value(const std::string& key, std::uint64_t fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  if (v->kind != Value::Kind::number || !v->exact_u64)
    throw ConfigError("config key " + key + " must be a nonnegative integer");
  return v->unum;
}

bool FlatConfig::flag(const std::string& key, bool fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  if (v->kind != Value::Kind::boolean) throw ConfigError("config key " + key + " must be a boolean");
  return v->truth;
}

std::string FlatConfig::text(const std::string& key, const std::string& fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  if (v->kind != Value::Kind::text) throw ConfigError("config key " + key + " must be a string");
  return v->str;
}

std::vector<int> FlatConfig::integers(const std::string& key) const {
  const Value* v = find(key);
  if (!v) return {};
  if (v->kind != Value::Kind::numbers)
    throw ConfigError("config key " + key + " must be an array of numbers");
  std::vector<int> out;
  for (double d : v->nums) {
    double r = std::round(d);
    if (std::abs(d - r) > 1e-9 || std::abs(r) > 2147483647.0)
      throw ConfigError("config key " + key + " must hold integers");
    out.push_back(static_cast<int>(r));
  }
  return out;
}

std::vector<std::uint64_t> FlatConfig::seed_values(const std::string& key) const {
  const Value* v = find(key);
  if (!v) return {};
  if (v->kind != Value::Kind::numbers)
    throw ConfigError("config key " + key + " must be an array of numbers");
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < v->nums.size(); ++i) {
    if (!v->elem_exact[i])
      throw ConfigError("config key " + key + " must hold nonnegative integers");
    out.push_back(v->unums[i]);
  }
  return out;
}

std::vector<std::string> FlatConfig::texts(const std::string& key) const {
  const Value* v = find(key);
  if (!v) return {};
  if (v->kind != Value::Kind::texts && !(v->kind == Value::Kind::numbers && v->nums.empty()))
    throw ConfigError("config key " + key + " must be an array of strings");
  return v->strs;
}

void FlatConfig::reject_unknown() const {
  std::string unknown;
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (!consumed_[i]) {
      if (!unknown.empty()) unknown += ", ";
      unknown += entries_[i].first;
    }
  if (!unknown.empty()) throw ConfigError("unknown config keys: " + unknown);
}

// --- train ----------------------------------------------------------------

CommandOutcome cmd_train(const FlatConfig& cfg, const CommandOptions& options) {
  RunScope run("train", cfg, options);
  try {
    int depth = cfg.integer("L", 1);
    int width = cfg.integer("m", 128);
    int dim = cfg.integer("d", 6);
    int n = cfg.integer("n", 20);
    double eta = cfg.number("eta", 0.1);
    int steps = cfg.integer("T", 500);
    std::string dataset_kind = cfg.text("dataset", "xor");
    int snapshot_every = cfg.integer("snapshot_every", 0);
    std::vector<std::string> probes = cfg.texts("probes");
    double margin_tol = cfg.number("margin_tol", 1e-8);
    int rademacher_draws = cfg.integer("rademacher_draws", 64);
    std::vector<std::uint64_t> seeds = resolve_seeds(cfg, options, 1);
    cfg.reject_unknown();
    if (n < 1) throw ConfigError("n must be >= 1");
    if (steps < 0) throw ConfigError("T must be >= 0");
    if (!(eta > 0.0)) throw ConfigError("eta must be > 0");
    run.seeds(seeds);

    bool wants_descent =
        std::find(probes.begin(), probes.end(), "descent") != probes.end();
    if (wants_descent && snapshot_every != 1) {
      snapshot_every = 1;
      run.note("snapshot_every forced to 1 for the descent probe");
    }

    TrainConfig tc;
    tc.step_size = eta;
    tc.steps = steps;
    tc.snapshot_every = snapshot_every;

    Clock::time_point t_train = Clock::now();
    std::vector<double> pop_errors;
    // Kept from the first seed for the probe phase.
    std::optional<NetworkParams> first_init;
    std::optional<Trajectory> first_traj;
    std::optional<LabeledDataset> first_data;

    for (std::size_t si = 0; si < seeds.size(); ++si) {
      std::uint64_t s = seeds[si];
      LabeledDataset data = make_dataset(dataset_kind, dim, static_cast<std::size_t>(n),
                                         sub_seed(s, 1));
      NetworkConfig nc{depth, width, dim, sub_seed(s, 2)};
      NetworkParams init = init_symmetric(nc);

      std::string tag = ".s" + std::to_string(s);
      std::filesystem::path init_ck = run.path_of("init" + tag + ".ckpt");
      save_checkpoint(init, 0, init_ck);
      run.artifact(init_ck);

      Trajectory traj = train(init, data, tc);
      for (const std::string& note : traj.notes) run.note(note);
      if (traj.diverged) throw NumericalError("training diverged (seed " + std::to_string(s) + ")");

      std::filesystem::path traj_csv = run.path_of("trajectory" + tag + ".csv");
      traj.write_csv(traj_csv);
      run.artifact(traj_csv);
      NetworkParams final_params = traj.snapshot(traj.snapshot_count() - 1);
      if (steps > 0) {
        std::filesystem::path final_ck = run.path_of("final" + tag + ".ckpt");
        save_checkpoint(final_params, steps, final_ck);
        run.artifact(final_ck);
      }
      if (dataset_kind == "xor" && dim <= 22) {
        LabeledDataset pop = xor_population(dim);
        pop_errors.push_back(population_metrics(final_params, pop).zero_one_error);
      }
      if (si == 0) {
        first_init = std::move(init);
        first_traj = std::move(traj);
        first_data = std::move(data);
      }
    }
    run.timing("train", t_train);

    if (!pop_errors.empty()) {
      double mean = 0;
      for (double e : pop_errors) mean += e;
      mean /= static_cast<double>(pop_errors.size());
      double var = 0;
      for (double e : pop_errors) var += (e - mean) * (e - mean);
      double stdev = pop_errors.size() > 1
                         ? std::sqrt(var / static_cast<double>(pop_errors.size() - 1))
                         : 0.0;
      std::string csv = "seed,population_error\n";
      for (std::size_t i = 0; i < pop_errors.size(); ++i)
        csv += std::to_string(seeds[i]) + "," + g17(pop_errors[i]) + "\n";
      std::filesystem::path pop_csv = run.path_of("population.csv");
      std::ofstream out(pop_csv, std::ios::binary);
      out << csv;
      if (!out) throw ConfigError("write failed for " + pop_csv.string());
      out.close();
      run.artifact(pop_csv);
      run.note("population_error mean " + g6(mean) + " std " + g6(stdev) + " over " +
               std::to_string(pop_errors.size()) + " seeds");
      run.check(!options.check || mean <= 0.5, "population error above chance");
    }

    if (!probes.empty()) {
      Clock::time_point t_probes = Clock::now();
      const NetworkParams& init = *first_init;
      const Trajectory& traj = *first_traj;
      const LabeledDataset& data = *first_data;
      NetworkParams final_params = traj.snapshot(traj.snapshot_count() - 1);
      std::uint64_t s0 = seeds.front();
      run.note("probes evaluated on the first seed (" + std::to_string(s0) + ")");

      for (const std::string& name : probes) {
        ProbeReport rep;
        if (name == "init-norm") {
          rep = init_norm_probe(init, data);
        } else if (name == "flip") {
          rep = flip_probe(init, final_params, data);
        } else if (name == "drift") {
          rep = drift_probe(init, final_params, data);
        } else if (name == "semi-smooth") {
          rep = semi_smooth_probe(final_params, init, data);
        } else if (name == "grad-drift") {
          rep = grad_drift_probe(final_params, init, data);
        } else if (name == "descent") {
          std::vector<TangentFeature> feats = tangent_features(init, data);
          MarginCertificate cert = solve_margin(feats, margin_tol);
          if (!(cert.gamma > 0.0))
            throw NumericalError("descent probe needs a positive margin; got 0");
          ReferenceModel ref = build_reference(init, cert, data, steps);
          rep = descent_probe(traj, ref.params, data, eta);
          run.note("margin gamma " + g6(cert.gamma) + " (dual gap " + g6(cert.dual_gap) + ")");
          if (options.check) {
            run.check(rep.scalars.at("fraction_satisfied") >= 0.95,
                      "descent slack satisfied on fewer than 95% of steps");
            run.check(rep.scalars.at("invariant_max_ratio") <= 1.2,
                      "telescoped invariant above 1.2x the objective");
          }
        } else if (name == "rademacher-linearized" || name == "rademacher-iterates") {
          double ball = frobenius_distance(final_params, init);
          if (ball == 0.0) {
            ball = 1.0;
            run.note("rademacher ball radius 0 replaced by 1");
          }
          std::vector<std::vector<double>> signs =
              sample_sign_vectors(data.size(), rademacher_draws, sub_seed(s0, 3));
          rep = name == "rademacher-linearized"
                    ? rademacher_linearized(init, data, ball, signs)
                    : rademacher_iterates(traj, data, signs);
        } else {
          throw ConfigError(
              "unknown probe '" + name +
              "' for train; available: init-norm, flip, drift, semi-smooth, grad-drift, "
              "descent, rademacher-linearized, rademacher-iterates");
        }
        save_probe_artifacts(run, rep, options.plots);
        if (options.check)
          run.check(rep.flags.empty(), "probe " + rep.name + " raised flags");
      }
      run.timing("probes", t_probes);
    }
    return run.finish();
  } catch (const std::exception& e) {
    run.fail(e.what());
    throw;
  }
}

// --- xor sweep ------------------------------------------------------------

SweepResult run_xor_sweep(const std::string& vary, const std::vector<int>& values, int fixed_n,
                          int fixed_d, const std::vector<std::uint64_t>& seeds,
                          const SweepDefaults& defaults) {
  if (vary != "n" && vary != "d") throw ConfigError("vary must be n or d");
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  if (seeds.empty()) throw ConfigError("sweep needs at least one seed");

  SweepResult result;
  for (int value : values) {
    int n = vary == "n" ? value : fixed_n;
    int d = vary == "d" ? value : fixed_d;
    if (n < 1) throw ConfigError("sample size must be >= 1");
    if (d < 3 || d > 22) throw ConfigError("dimension must be in [3, 22]");

    LabeledDataset pop = xor_population(d);
    std::vector<double> errors;
    for (std::uint64_t s : seeds) {
      XorSpec spec;
      spec.dim = d;
      spec.seed = sub_seed(s, 1);
      LabeledDataset data = xor_sample(spec, static_cast<std::size_t>(n));
      NetworkConfig nc{defaults.depth, defaults.width, d, sub_seed(s, 2)};
      NetworkParams init = init_symmetric(nc);

      TrainConfig tc;
      // Per-sample step convention (see the header): full-batch step scales
      // with the cell's n, so the guard threshold does not apply.
      tc.step_size = defaults.step_size * static_cast<double>(n);
      tc.steps = defaults.steps;
      tc.snapshot_every = 0;
      tc.guard_step_size = false;
      Trajectory traj = train(init, data, tc);
      if (traj.diverged)
        throw NumericalError("sweep cell diverged (n=" + std::to_string(n) +
                             " d=" + std::to_string(d) + " seed=" + std::to_string(s) + ")");
      NetworkParams final_params = traj.snapshot(traj.snapshot_count() - 1);
      errors.push_back(population_metrics(final_params, pop).zero_one_error);
    }
    double mean = 0;
    for (double e : errors) mean += e;
    mean /= static_cast<double>(errors.size());
    double var = 0;
    for (double e : errors) var += (e - mean) * (e - mean);

    SweepRow row;
    row.n = static_cast<std::size_t>(n);
    row.d = d;
    row.ratio = static_cast<double>(d) * d / static_cast<double>(n);
    row.mean_error = mean;
    row.std_error =
        errors.size() > 1 ? std::sqrt(var / static_cast<double>(errors.size() - 1)) : 0.0;
    row.seeds = seeds;
    result.rows.push_back(std::move(row));
  }
  std::stable_sort(result.rows.begin(), result.rows.end(),
                   [](const SweepRow& a, const SweepRow& b) { return a.ratio < b.ratio; });
  std::vector<std::pair<double, double>> xy;
  for (const SweepRow& row : result.rows) xy.emplace_back(row.ratio, row.mean_error);
  LinearFit fit = origin_fit(xy);
  result.slope = fit.slope;
  result.r2 = fit.r2;
  return result;
}

void write_sweep_csv(const SweepResult& result, const std::filesystem::path& file) {
  std::string out = "n,d,d2_over_n,mean_test_error,std_test_error,seeds\n";
  for (const SweepRow& row : result.rows) {
    out += std::to_string(row.n) + "," + std::to_string(row.d) + "," + g17(row.ratio) + "," +
           g17(row.mean_error) + "," + g17(row.std_error) + "," + join_seeds(row.seeds, ';') +
           "\n";
  }
  std::ofstream f(file, std::ios::binary);
  if (!f) throw ConfigError("cannot open " + file.string() + " for writing");
  f << out;
  if (!f) throw ConfigError("write failed for " + file.string());
}

SweepResult load_sweep_csv(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + file.string());
  std::string line;
  if (!std::getline(in, line) || line != "n,d,d2_over_n,mean_test_error,std_test_error,seeds")
    throw ConfigError(file.string() + " is not a sweep CSV (bad header)");
  SweepResult result;
  std::vector<std::pair<double, double>> xy;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6)
      throw ConfigError(file.string() + " line " + std::to_string(lineno) + ": expected 6 cells");
    SweepRow row;
    try {
      row.n = std::stoull(cells[0]);
      row.d = std::stoi(cells[1]);
      row.ratio = std::stod(cells[2]);
      row.mean_error = std::stod(cells[3]);
      row.std_error = std::stod(cells[4]);
      std::stringstream seeds_ss(cells[5]);
      std::string seed_cell;
      while (std::getline(seeds_ss, seed_cell, ';'))
        row.seeds.push_back(std::stoull(seed_cell));
    } catch (const std::exception&) {
      throw ConfigError(file.string() + " line " + std::to_string(lineno) + ": bad cell");
    }
    xy.emplace_back(row.ratio, row.mean_error);
    result.rows.push_back(std::move(row));
  }
  LinearFit fit = origin_fit(xy);
  result.slope = fit.slope;
  result.r2 = fit.r2;
  return result;
}

CommandOutcome cmd_xor_sweep(const FlatConfig& cfg, const CommandOptions& options) {
  RunScope run("xor-sweep", cfg, options);
  try {
    std::string vary = cfg.text("vary", "n");
    std::vector<int> values = cfg.integers("values");
    SweepDefaults defaults;
    defaults.width = cfg.integer("m", defaults.width);
    defaults.depth = cfg.integer("L", defaults.depth);
    defaults.steps = cfg.integer("T", defaults.steps);
    defaults.step_size = cfg.number("eta", defaults.step_size);
    int fixed_n = cfg.integer("n", 64);
    int fixed_d = cfg.integer("d", 6);
    std::vector<std::uint64_t> seeds = resolve_seeds(cfg, options, 10);
    cfg.reject_unknown();
    if (values.size() < 3) throw ConfigError("sweep needs at least 3 values");
    if (seeds.size() < 3) throw ConfigError("sweep needs at least 3 seeds");
    run.seeds(seeds);

    Clock::time_point t_sweep = Clock::now();
    SweepResult result = run_xor_sweep(vary, values, fixed_n, fixed_d, seeds, defaults);
    run.timing("sweep", t_sweep);

    std::filesystem::path csv = run.path_of("sweep.csv");
    write_sweep_csv(result, csv);
    run.artifact(csv);
    run.note("fit: error ~= " + g6(result.slope) + " * d^2/n (through origin, r2 " +
             g6(result.r2) + ")");
    if (options.plots) {
      ProbeReport rep;
      rep.name = "xor_sweep";
      for (const SweepRow& row : result.rows)
        rep.series["error_vs_ratio"].emplace_back(row.ratio, row.mean_error);
      rep.scalars["slope"] = result.slope;
      rep.scalars["r2"] = result.r2;
      save_probe_artifacts(run, rep, true);
    }
    if (options.check) {
      run.check(result.slope >= 0.10 && result.slope <= 0.20,
                "fitted slope " + g6(result.slope) + " outside [0.10, 0.20]");
      run.check(result.r2 >= 0.8, "fit r2 " + g6(result.r2) + " below 0.8");
    }
    return run.finish();
  } catch (const std::exception& e) {
    run.fail(e.what());
    throw;
  }
}

// --- margin ---------------------------------------------------------------

PowerFit margin_dimension_trend(int width, int depth, std::size_t n, const std::vector<int>& dims,
                                std::uint64_t seed, std::vector<MarginTrendPoint>& points) {
  if (dims.size() < 2) throw ConfigError("margin trend needs at least 2 dimensions");
  points.clear();
  std::vector<std::pair<double, double>> xy;
  for (int d : dims) {
    XorSpec spec;
    spec.dim = d;
    spec.seed = sub_seed(seed, 100 + static_cast<std::uint64_t>(d));
    LabeledDataset data = xor_sample(spec, n);
    NetworkConfig nc{depth, width, d, sub_seed(seed, 200 + static_cast<std::uint64_t>(d))};
    NetworkParams init = init_symmetric(nc);
    MarginCertificate cert = solve_margin(tangent_features(init, data));
    if (!(cert.gamma > 0.0))
      throw NumericalError("margin vanished at d=" + std::to_string(d) +
                           "; the 1/gamma trend is undefined");
    points.push_back({d, cert.gamma});
    xy.emplace_back(static_cast<double>(d), 1.0 / cert.gamma);
  }
  return fit_power_law(xy);
}

CommandOutcome cmd_margin(const FlatConfig& cfg, const CommandOptions& options) {
  RunScope run("margin", cfg, options);
  try {
    int depth = cfg.integer("L", 1);
    int width = cfg.integer("m", 128);
    int dim = cfg.integer("d", 6);
    int n = cfg.integer("n", 20);
    std::uint64_t seed = cfg.seed_value("seed", 0);
    double tol = cfg.number("tol", 1e-8);
    bool d_sweep = cfg.flag("d_sweep", false);
    std::vector<int> d_values = cfg.integers("d_values");
    cfg.reject_unknown();
    if (d_values.empty()) d_values = {4, 5, 6, 7, 8, 9, 10};
    if (n < 1) throw ConfigError("n must be >= 1");
    run.seeds({seed});

    XorSpec spec;
    spec.dim = dim;
    spec.seed = sub_seed(seed, 1);
    LabeledDataset data = xor_sample(spec, static_cast<std::size_t>(n));
    NetworkConfig nc{depth, width, dim, sub_seed(seed, 2)};
    NetworkParams init = init_symmetric(nc);

    Clock::time_point t_solve = Clock::now();
    MarginCertificate cert = solve_margin(tangent_features(init, data), tol);
    run.timing("solve", t_solve);

    nlohmann::json j;
    j["gamma"] = cert.gamma;
    j["dual_gap"] = cert.dual_gap;
    j["iterations"] = cert.iterations;
    j["converged"] = cert.converged;
    j["dual_weights"] = cert.dual_weights;
    j["notes"] = cert.notes;
    j["scope"] = "certifies the realized training set only";
    j["m"] = width;
    j["L"] = depth;
    j["d"] = dim;
    j["n"] = n;
    j["seed"] = seed;
    std::filesystem::path cert_path = run.path_of("certificate.json");
    {
      std::ofstream out(cert_path, std::ios::binary);
      if (!out) throw ConfigError("cannot open " + cert_path.string() + " for writing");
      out << j.dump(2) << '\n';
      if (!out) throw ConfigError("write failed for " + cert_path.string());
    }
    run.artifact(cert_path);

    if (cert.gamma > 0.0) {
      const Matrix& w_star = cert.w_star.layers.at(cert.w_star.layers.size() - 1);
      std::filesystem::path w_path = run.path_of("w_star.ckpt");
      save_matrix_checkpoint(w_star, w_path);
      run.artifact(w_path);
    } else {
      run.note("gamma is 0; no maximizing direction to save");
    }
    run.note("gamma " + g6(cert.gamma) + " dual_gap " + g6(cert.dual_gap));
    if (options.check) {
      run.check(cert.gamma > 0.0, "no positive margin certified");
      run.check(cert.converged, "margin solver did not converge");
    }

    if (d_sweep) {
      Clock::time_point t_trend = Clock::now();
      std::vector<MarginTrendPoint> points;
      PowerFit fit = margin_dimension_trend(width, depth, static_cast<std::size_t>(n), d_values,
                                            seed, points);
      run.timing("d_trend", t_trend);
      ProbeReport rep;
      rep.name = "margin_d_trend";
      for (const MarginTrendPoint& p : points)
        rep.series["inv_gamma_vs_d"].emplace_back(static_cast<double>(p.d), 1.0 / p.gamma);
      rep.fit = fit;
      rep.scalars["exponent"] = fit.exponent;
      rep.scalars["r2"] = fit.r2;
      rep.meta["m"] = std::to_string(width);
      rep.meta["L"] = std::to_string(depth);
      rep.meta["n"] = std::to_string(n);
      rep.meta["seed"] = std::to_string(seed);
      if (fit.r2 < 0.7) rep.flags.push_back("low_r2");
      save_probe_artifacts(run, rep, options.plots);
      run.note("1/gamma vs d exponent " + g6(fit.exponent) + " (r2 " + g6(fit.r2) + ")");
      if (options.check)
        run.check(fit.exponent >= 0.7 && fit.exponent <= 1.4,
                  "1/gamma exponent " + g6(fit.exponent) + " outside [0.7, 1.4]");
    }
    return run.finish();
  } catch (const std::exception& e) {
    run.fail(e.what());
    throw;
  }
}

// --- probe ----------------------------------------------------------------

std::vector<std::string> probe_catalog() {
  return {"flip",        "flip-sweep",      "drift",           "drift-doubling",
          "lipschitz",   "semi-smooth",     "semi-smooth-sweep", "grad-drift",
          "grad-drift-sweep", "init-norm",  "gaussian-indicator", "rademacher-linearized"};
}

CommandOutcome cmd_probe(const std::string& name, const FlatConfig& cfg,
                         const CommandOptions& options) {
  RunScope run("probe " + name, cfg, options);
  try {
    std::uint64_t seed = cfg.seed_value("seed", 0);
    run.seeds({seed});
    ProbeReport rep;

    auto sweep_from_config = [&](std::vector<int> default_widths, int default_repeats,
                                 double default_radius) {
      ScalingSweep sw;
      sw.widths = cfg.integers("widths");
      if (sw.widths.empty()) sw.widths = std::move(default_widths);
      sw.repeats = cfg.integer("repeats", default_repeats);
      sw.depth = cfg.integer("L", 2);
      sw.input_dim = cfg.integer("d", 8);
      sw.sample_count = cfg.integer("n", 8);
      sw.radius = cfg.number("radius", default_radius);
      sw.seed = seed;
      return sw;
    };
    auto make_pair_inputs = [&](double default_radius) {
      NetworkConfig nc{cfg.integer("L", 2), cfg.integer("m", 256), cfg.integer("d", 8),
                       sub_seed(seed, 2)};
      NetworkParams init = init_symmetric(nc);
      double radius = cfg.number("radius", default_radius);
      NetworkParams pert =
          radius == 0.0 ? init : perturb_layers(init, radius, sub_seed(seed, 9));
      LabeledDataset data =
          sphere_sample(nc.input_dim, static_cast<std::size_t>(cfg.integer("n", 8)),
                        sub_seed(seed, 8));
      return std::make_tuple(std::move(init), std::move(pert), std::move(data));
    };

    if (name == "flip") {
      auto [init, pert, data] = make_pair_inputs(1.0);
      rep = flip_probe(init, pert, data);
      run.check(!options.check || rep.flags.empty(), "flip probe raised flags");
    } else if (name == "drift") {
      auto [init, pert, data] = make_pair_inputs(1.0);
      rep = drift_probe(init, pert, data);
      if (options.check) {
        run.check(rep.flags.empty(), "drift probe raised flags");
        run.check(rep.scalars.at("last_layer_drift") + 1e-12 >=
                      rep.scalars.at("output_drift_floor"),
                  "last-layer drift below the output-difference floor");
      }
    } else if (name == "flip-sweep") {
      rep = flip_sweep(sweep_from_config({256, 1024, 4096}, 10, 1.0));
      if (options.check) {
        run.check(rep.scalars.at("exponent") >= 0.5 && rep.scalars.at("exponent") <= 0.85,
                  "flip exponent " + g6(rep.scalars.at("exponent")) + " outside [0.5, 0.85]");
        run.check(!contains_flag(rep, "low_r2"), "flip sweep fit has low r2");
      }
    } else if (name == "drift-doubling") {
      int w = cfg.integer("width", 512);
      ScalingSweep sw = sweep_from_config({w, 2 * w}, 10, 1.0);
      rep = drift_doubling(sw);
      if (options.check) {
        double lo = 1.0 / (1.5 * std::sqrt(2.0)), hi = 1.5 / std::sqrt(2.0);
        run.check(rep.scalars.at("median_ratio") >= lo && rep.scalars.at("median_ratio") <= hi,
                  "doubling ratio " + g6(rep.scalars.at("median_ratio")) + " outside bracket");
      }
    } else if (name == "lipschitz") {
      NetworkConfig nc{cfg.integer("L", 4), cfg.integer("m", 4096), cfg.integer("d", 8),
                       sub_seed(seed, 2)};
      NetworkParams init = init_symmetric(nc);
      rep = lipschitz_probe(init, cfg.number("radius", 2.0), cfg.integer("points", 200),
                            cfg.integer("perturbations", 5), sub_seed(seed, 3));
      run.check(!options.check || rep.scalars.at("constant") <= 10.0,
                "drift constant " + g6(rep.scalars.at("constant")) + " above 10");
    } else if (name == "semi-smooth") {
      NetworkConfig nc{cfg.integer("L", 2), cfg.integer("m", 256), cfg.integer("d", 8),
                       sub_seed(seed, 2)};
      NetworkParams init = init_symmetric(nc);
      double radius = cfg.number("radius", 2.0);
      NetworkParams a = perturb_layers(init, radius, sub_seed(seed, 11));
      NetworkParams b = perturb_layers(init, radius, sub_seed(seed, 12));
      LabeledDataset data = sphere_sample(nc.input_dim,
                                          static_cast<std::size_t>(cfg.integer("n", 8)),
                                          sub_seed(seed, 8));
      rep = semi_smooth_probe(a, b, data);
      run.check(!options.check || rep.flags.empty(), "semi-smooth probe raised flags");
    } else if (name == "semi-smooth-sweep") {
      rep = semi_smooth_sweep(sweep_from_config({256, 1024, 4096}, 20, 2.0));
      run.check(!options.check || !contains_flag(rep, "not_monotone"),
                "semi-smooth medians not strictly decreasing");
    } else if (name == "grad-drift") {
      auto [init, pert, data] = make_pair_inputs(1.0);
      rep = grad_drift_probe(pert, init, data);
      run.check(!options.check || rep.flags.empty(), "grad-drift probe raised flags");
    } else if (name == "grad-drift-sweep") {
      rep = grad_drift_sweep(sweep_from_config({256, 1024, 4096}, 10, 1.0));
      run.check(!options.check || !contains_flag(rep, "not_monotone"),
                "grad-drift medians not strictly decreasing");
    } else if (name == "init-norm") {
      NetworkConfig nc{cfg.integer("L", 4), cfg.integer("m", 4096), cfg.integer("d", 8),
                       sub_seed(seed, 2)};
      NetworkParams init = init_symmetric(nc);
      LabeledDataset data = sphere_sample(nc.input_dim,
                                          static_cast<std::size_t>(cfg.integer("n", 16)),
                                          sub_seed(seed, 8));
      rep = init_norm_probe(init, data, cfg.number("spectral_tol", 1e-6),
                            cfg.integer("product_points", 1));
      if (options.check) {
        run.check(rep.scalars.at("max_spectral_ratio") <= 3.0, "spectral norm above 3 sqrt(m)");
        run.check(rep.scalars.at("hidden_sq_min") >= 2.0 / 3.0 &&
                      rep.scalars.at("hidden_sq_max") <= 4.0 / 3.0,
                  "hidden norms outside [2/3, 4/3]");
        if (rep.scalars.count("max_product_ratio"))
          run.check(rep.scalars.at("max_product_ratio") <= 10.0,
                    "masked product norm above 10 L sqrt(log m)");
        run.check(rep.flags.empty(), "init-norm probe raised flags");
      }
    } else if (name == "gaussian-indicator") {
      rep = gaussian_indicator_check(cfg.integer("d", 8),
                                     static_cast<std::int64_t>(cfg.number("trials", 1000000.0)),
                                     seed);
      run.check(!options.check || rep.scalars.at("abs_error") <= 0.01,
                "indicator estimate off by more than 0.01");
    } else if (name == "rademacher-linearized") {
      NetworkConfig nc{cfg.integer("L", 2), cfg.integer("m", 64), cfg.integer("d", 8),
                       sub_seed(seed, 2)};
      NetworkParams init = init_symmetric(nc);
      LabeledDataset data = sphere_sample(nc.input_dim,
                                          static_cast<std::size_t>(cfg.integer("n", 8)),
                                          sub_seed(seed, 8));
      std::vector<std::vector<double>> signs =
          sample_sign_vectors(data.size(), cfg.integer("draws", 64), sub_seed(seed, 3));
      rep = rademacher_linearized(init, data, cfg.number("ball", 1.0), signs);
      run.check(!options.check || rep.flags.empty(), "rademacher probe raised flags");
    } else {
      std::string catalog;
      for (const std::string& p : probe_catalog()) {
        if (!catalog.empty()) catalog += ", ";
        catalog += p;
      }
      throw ConfigError("unknown probe '" + name + "'; available: " + catalog);
    }
    cfg.reject_unknown();
    save_probe_artifacts(run, rep, options.plots);
    return run.finish();
  } catch (const std::exception& e) {
    run.fail(e.what());
    throw;
  }
}

// --- report ---------------------------------------------------------------

int cmd_report(const std::vector<std::filesystem::path>& manifest_paths,
               const CommandOptions& options, std::ostream& out) {
  if (manifest_paths.empty()) {
    out << "no manifests given; nothing to report\n";
    return 2;
  }
  nlohmann::json summary;
  summary["manifests"] = nlohmann::json::array();
  summary["clashes"] = nlohmann::json::array();
  summary["probes"] = nlohmann::json::array();
  summary["sweeps"] = nlohmann::json::array();

  struct Loaded {
    std::filesystem::path path;
    RunManifest manifest;
  };
  std::vector<Loaded> loaded;
  for (const auto& p : manifest_paths) loaded.push_back({p, load_manifest(p)});

  for (const Loaded& lm : loaded) {
    const RunManifest& m = lm.manifest;
    std::filesystem::path base = lm.path.parent_path();
    out << "== " << lm.path.string() << "\n";
    out << "   command: " << m.command << "   status: " << m.status << "   version: " << m.version
        << "\n";
    if (!m.seeds.empty()) out << "   seeds: " << join_seeds(m.seeds, ' ') << "\n";

    nlohmann::json jm;
    jm["path"] = lm.path.string();
    jm["command"] = m.command;
    jm["status"] = m.status;
    jm["missing"] = nlohmann::json::array();

    for (const std::string& a : m.artifacts) {
      std::filesystem::path ap = base / a;
      bool exists = std::filesystem::exists(ap);
      if (!exists) {
        out << "   MISSING artifact: " << a << "\n";
        jm["missing"].push_back(a);
        continue;
      }
      if (a.size() > 5 && a.rfind(".json") == a.size() - 5 && a != "manifest.json" &&
          a != "certificate.json" && a != "summary.json") {
        try {
          std::ifstream in(ap, std::ios::binary);
          std::stringstream ss;
          ss << in.rdbuf();
          ProbeReport rep = report_from_json_string(ss.str());
          std::string verdict = rep.flags.empty() ? "PASS" : "FLAGGED";
          out << "   PROBE " << rep.name << ": " << verdict;
          if (!rep.flags.empty()) {
            out << " [";
            for (std::size_t i = 0; i < rep.flags.size(); ++i)
              out << (i ? ", " : "") << rep.flags[i];
            out << "]";
          }
          if (rep.fit) out << "  (exponent " << g6(rep.fit->exponent) << ", r2 " << g6(rep.fit->r2) << ")";
          out << "\n";
          nlohmann::json jp;
          jp["name"] = rep.name;
          jp["flags"] = rep.flags;
          summary["probes"].push_back(jp);
        } catch (const ConfigError&) {
          // not a probe report; listed as a plain artifact below
        }
      }
      if (a.size() > 4 && a.rfind(".csv") == a.size() - 4 &&
          a.find("sweep") != std::string::npos) {
        try {
          SweepResult r = load_sweep_csv(ap);
          out << "   SWEEP " << a << " (" << r.rows.size() << " rows)\n";
          out << "      n    d    d^2/n     mean_err  std_err\n";
          for (const SweepRow& row : r.rows) {
            char line[128];
            std::snprintf(line, sizeof(line), "      %-4zu %-4d %-9.4g %-9.4g %-9.4g\n", row.n,
                          row.d, row.ratio, row.mean_error, row.std_error);
            out << line;
          }
          out << "      fit: error ~= " << g6(r.slope) << " * d^2/n (through origin, r2 "
              << g6(r.r2) << ")\n";
          nlohmann::json js;
          js["file"] = a;
          js["rows"] = r.rows.size();
          js["slope"] = r.slope;
          js["r2"] = r.r2;
          summary["sweeps"].push_back(js);
        } catch (const ConfigError&) {
          // other CSV kinds (trajectories, series) are routine artifacts
        }
      }
    }
    for (const std::string& note : m.notes) out << "   note: " << note << "\n";
    summary["manifests"].push_back(jm);
  }

  // Same command run twice with different configs: surface it, keep going.
  for (std::size_t i = 0; i < loaded.size(); ++i)
    for (std::size_t j = i + 1; j < loaded.size(); ++j)
      if (loaded[i].manifest.command == loaded[j].manifest.command &&
          loaded[i].manifest.config_echo != loaded[j].manifest.config_echo) {
        out << "CLASH: " << loaded[i].manifest.command << " configs differ between "
            << loaded[i].path.string() << " and " << loaded[j].path.string() << "\n";
        nlohmann::json jc;
        jc["command"] = loaded[i].manifest.command;
        jc["first"] = loaded[i].path.string();
        jc["second"] = loaded[j].path.string();
        summary["clashes"].push_back(jc);
      }

  std::filesystem::create_directories(options.out_dir);
  std::filesystem::path sp = options.out_dir / "summary.json";
  std::ofstream sf(sp, std::ios::binary);
  if (!sf) throw ConfigError("cannot open " + sp.string() + " for writing");
  sf << summary.dump(2) << '\n';
  out << "summary written to " << sp.string() << "\n";
  return 0;
}

}  // namespace ntklab
