#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ntklab/dataset.hpp"
#include "ntklab/network.hpp"

namespace ntklab {

struct TrainConfig {
  double step_size = 0.1;
  int steps = 100;
  int snapshot_every = 1;           // 0 disables periodic snapshots (step 0 and final kept)
  bool guard_step_size = true;      // warn when step_size > 4 / (5 * depth)
  double divergence_threshold = 1e6;
  // Where snapshots go. Empty: in memory for width <= 1024, else a fresh
  // directory under the system temp dir (memory hygiene for wide sweeps).
  std::filesystem::path snapshot_dir;
};

double empirical_risk(const NetworkParams& p, const LabeledDataset& data);

// Mean logistic margin loss gradient: (1/n) sum_i loss'(y_i f(x_i)) y_i df/dW.
// Accumulated sample by sample in index order; bit-identical across runs.
GradientSet risk_gradient(const NetworkParams& p, const LabeledDataset& data);

// One full-batch descent step, in place.
void gd_step(NetworkParams& p, const LabeledDataset& data, double step_size);

struct TrajectoryRow {
  int step;
  double train_loss;       // empirical risk at W(step)
  double dist_from_init;   // Frobenius distance to W(0)
  double dist_from_ref;    // NaN when no reference was supplied
  double grad_norm;        // Frobenius norm of the risk gradient at W(step)
};

class Trajectory {
 public:
  std::vector<TrajectoryRow> rows;
  bool diverged = false;
  std::vector<std::string> notes;

  std::size_t snapshot_count() const { return snapshot_steps_.size(); }
  int snapshot_step(std::size_t i) const { return snapshot_steps_[i]; }
  NetworkParams snapshot(std::size_t i) const;  // loads from disk when file-backed
  bool file_backed() const { return file_backed_; }

  // step,train_loss,dist_from_init,dist_from_ref,grad_norm with 17 significant digits.
  void write_csv(const std::filesystem::path& file) const;

  void add_snapshot(const NetworkParams& p, int step);
  void use_directory(const std::filesystem::path& dir);

 private:
  std::vector<int> snapshot_steps_;
  std::vector<NetworkParams> in_memory_;
  std::vector<std::filesystem::path> files_;
  std::filesystem::path dir_;
  bool file_backed_ = false;
};

// Full-batch gradient descent for cfg.steps steps. Rows cover steps 0..steps
// at W(step) before any update; snapshots at step 0, every snapshot_every, and
// the final step. Risk above divergence_threshold aborts, leaving a flagged
// partial trajectory. Deterministic: two runs from the same start are
// bit-identical. reference, when given, fills dist_from_ref.
Trajectory train(const NetworkParams& start, const LabeledDataset& data, const TrainConfig& cfg,
                 const NetworkParams* reference = nullptr);

struct ObjectiveBound {
  double value;              // 3 * step_size * steps * risk(reference) + ||init - reference||_F^2
  double reference_risk;
  double squared_distance;
  bool at_least_one;         // the bound's useful regime
};

ObjectiveBound eval_F_S(const NetworkParams& reference, const NetworkParams& init,
                        const LabeledDataset& data, double step_size, int steps);

// Mean absolute loss derivative at the reference margins; never exceeds the risk.
double eval_Ftilde_S(const NetworkParams& reference, const LabeledDataset& data);

}  // namespace ntklab
