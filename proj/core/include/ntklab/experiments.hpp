#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ntklab/probes.hpp"

namespace ntklab {

inline constexpr const char* kVersionString = "ntklab 0.1.0";

// Record of one command invocation. Written even when the run fails (with
// status "failed"), and always as the last file of the run, so the presence of
// manifest.json marks a directory as complete.
struct RunManifest {
  std::string command;
  std::string config_echo;  // the parsed flat config, compact JSON
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> artifacts;  // paths relative to the manifest's directory
  std::map<std::string, double> timings_sec;
  std::string version = kVersionString;
  std::vector<std::string> notes;
  std::string status = "ok";  // "ok" | "failed"
};

// Verifies every listed artifact exists under dir, then writes
// <dir>/manifest.json. Returns the manifest path.
std::filesystem::path write_manifest(const RunManifest& m, const std::filesystem::path& dir);
RunManifest load_manifest(const std::filesystem::path& file);

// One flat JSON object per command. Values are scalars or arrays of scalars;
// nested objects are rejected. Keys a command never asked for are reported by
// name via reject_unknown().
class FlatConfig {
 public:
  static FlatConfig parse(const std::string& text);
  static FlatConfig load(const std::filesystem::path& file);

  bool has(const std::string& key) const;
  double number(const std::string& key, double fallback) const;
  int integer(const std::string& key, int fallback) const;
  std::uint64_t seed_value(const std::string& key, std::uint64_t fallback) const;
  bool flag(const std::string& key, bool fallback) const;
  std::string text(const std::string& key, const std::string& fallback) const;
  std::vector<int> integers(const std::string& key) const;  // {} when absent
  std::vector<std::uint64_t> seed_values(const std::string& key) const;
  std::vector<std::string> texts(const std::string& key) const;

  void reject_unknown() const;  // throws ConfigError naming unconsumed keys
  std::string echo() const { return echo_; }

 private:
  struct Value {
    enum class Kind { number, boolean, text, numbers, texts };
    Kind kind = Kind::number;
    double num = 0.0;
    std::uint64_t unum = 0;     // exact value when exact_u64
    bool exact_u64 = false;     // true for nonnegative JSON integers
    bool truth = false;
    std::string str;
    std::vector<double> nums;
    std::vector<std::uint64_t> unums;
    std::vector<std::uint8_t> elem_exact;
    std::vector<std::string> strs;
  };
  std::vector<std::pair<std::string, Value>> entries_;
  mutable std::vector<std::uint8_t> consumed_;
  std::string echo_;
  const Value* find(const std::string& key) const;
};

struct CommandOptions {
  std::filesystem::path out_dir = "runs";
  std::vector<std::uint64_t> seeds;  // --seeds override; empty defers to the config
  bool plots = false;
  bool check = false;  // assert command-specific pass conditions; failures -> exit 4
};

struct CommandOutcome {
  RunManifest manifest;
  int exit_code = 0;  // 0, or 4 when a --check assertion failed
};

// Aggregated noisy-parity run grid. ratio is d^2/n, the predicted scale of the
// test error.
struct SweepRow {
  std::size_t n = 0;
  int d = 0;
  double ratio = 0.0;
  double mean_error = 0.0;
  double std_error = 0.0;  // sample std over seeds; 0 with a single seed
  std::vector<std::uint64_t> seeds;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // sorted by ratio
  // Through-origin least-squares fit error ~= slope * d^2/n. The quantity of
  // interest is the proportionality constant, so no intercept is fitted; r2 is
  // still 1 - SS_res/SS_tot with SS_tot about the mean (can go negative when
  // the line fits worse than a constant).
  double slope = 0.0;
  double r2 = 0.0;
};

struct SweepDefaults {
  int width = 128;
  int depth = 1;
  int steps = 500;
  double step_size = 0.1;  // per-sample step; the full-batch step is step_size * n
};

// vary is "n" or "d"; the other quantity is fixed. One full training run per
// (value, seed) cell; the error column is the exact population zero-one error
// over all 2^d parity points. Cells are evaluated in index order.
//
// Step-size convention: the configured step is per sample, i.e. gradient
// descent uses step_size * n on the mean empirical risk (equivalently,
// step_size on the un-normalized sum). A fixed per-sample step keeps the
// per-example force comparable across cells with different n; with a fixed
// full-batch step the larger cells stop far short of convergence and the
// error-vs-d^2/n trend flattens out.
SweepResult run_xor_sweep(const std::string& vary, const std::vector<int>& values, int fixed_n,
                          int fixed_d, const std::vector<std::uint64_t>& seeds,
                          const SweepDefaults& defaults = {});

// n,d,d2_over_n,mean_test_error,std_test_error,seeds (seeds ';'-joined).
void write_sweep_csv(const SweepResult& result, const std::filesystem::path& file);
SweepResult load_sweep_csv(const std::filesystem::path& file);

// Margin exponent of 1/gamma against the input dimension (log-log fit).
struct MarginTrendPoint {
  int d = 0;
  double gamma = 0.0;
};

PowerFit margin_dimension_trend(int width, int depth, std::size_t n, const std::vector<int>& dims,
                                std::uint64_t seed, std::vector<MarginTrendPoint>& points);

// Commands. Each writes its artifacts plus manifest.json under options.out_dir
// and never leaves the directory without a manifest: on error a failed
// manifest is written before the exception continues up.
CommandOutcome cmd_train(const FlatConfig& cfg, const CommandOptions& options);
CommandOutcome cmd_xor_sweep(const FlatConfig& cfg, const CommandOptions& options);
CommandOutcome cmd_margin(const FlatConfig& cfg, const CommandOptions& options);
CommandOutcome cmd_probe(const std::string& name, const FlatConfig& cfg,
                         const CommandOptions& options);

std::vector<std::string> probe_catalog();

// Merges manifests into a human-readable summary on `out` plus
// <out_dir>/summary.json. Missing artifacts and config clashes are listed,
// not fatal. An empty manifest list returns 2.
int cmd_report(const std::vector<std::filesystem::path>& manifest_paths,
               const CommandOptions& options, std::ostream& out);

}  // namespace ntklab
