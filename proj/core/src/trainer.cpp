#include "ntklab/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <string>

#include "ntklab/checkpoint.hpp"
#include "ntklab/errors.hpp"
#include "ntklab/loss.hpp"

namespace ntklab {

namespace {

struct RiskGrad {
  double risk;
  GradientSet grads;
};

// One pass over the sample: risk and the accumulated risk gradient. Per-sample
// contributions are added in index order, so results are bit-identical across
// runs regardless of worker count.
RiskGrad risk_and_gradient(const NetworkParams& p, const LabeledDataset& data) {
  if (data.size() == 0) throw ConfigError("risk gradient over an empty dataset");
  RiskGrad out;
  out.grads.layers.reserve(p.layers.size());
  for (const Matrix& w : p.layers) out.grads.layers.emplace_back(w.rows(), w.cols());

  double inv_n = 1.0 / static_cast<double>(data.size());
  long double risk_acc = 0.0L;
  ActivationTrace trace;
  for (std::size_t i = 0; i < data.size(); ++i) {
    double y = data.labels[i];
    double f = forward_with_trace(p, data.point(i), trace);
    risk_acc += logistic_loss(y * f);
    double c = inv_n * y * logistic_loss_grad(y * f);
    std::vector<std::vector<double>> v = backprop_vectors(p, trace);
    for (std::size_t l = 0; l < out.grads.layers.size(); ++l) {
      Matrix& acc = out.grads.layers[l];
      const std::vector<double>& left = v[l];
      const std::vector<double>& right = trace.h[l];
      for (std::size_t r = 0; r < acc.rows(); ++r) {
        double cr = c * left[r];
        if (cr == 0.0) continue;
        double* row = acc.row(r);
        for (std::size_t j = 0; j < acc.cols(); ++j) row[j] += cr * right[j];
      }
    }
  }
  out.risk = static_cast<double>(risk_acc / static_cast<long double>(data.size()));
  return out;
}

std::string format17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::filesystem::path fresh_temp_dir() {
  std::random_device rd;
  for (int attempt = 0; attempt < 64; ++attempt) {
    std::filesystem::path dir =
        std::filesystem::temp_directory_path() /
        ("ntklab-snapshots-" + std::to_string(rd()) + "-" + std::to_string(attempt));
    std::error_code ec;
    if (std::filesystem::create_directories(dir, ec) && !ec) return dir;
  }
  throw ConfigError("cannot create a temporary snapshot directory");
}

}  // namespace

double empirical_risk(const NetworkParams& p, const LabeledDataset& data) {
  if (data.size() == 0) throw ConfigError("empirical risk over an empty dataset");
  long double acc = 0.0L;
  for (std::size_t i = 0; i < data.size(); ++i)
    acc += logistic_loss(data.labels[i] * forward(p, data.point(i)));
  return static_cast<double>(acc / static_cast<long double>(data.size()));
}

GradientSet risk_gradient(const NetworkParams& p, const LabeledDataset& data) {
  return risk_and_gradient(p, data).grads;
}

void gd_step(NetworkParams& p, const LabeledDataset& data, double step_size) {
  GradientSet g = risk_gradient(p, data);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    double* w = p.layers[l].data();
    const double* d = g.layers[l].data();
    for (std::size_t i = 0; i < p.layers[l].size(); ++i) w[i] -= step_size * d[i];
  }
}

NetworkParams Trajectory::snapshot(std::size_t i) const {
  if (i >= snapshot_steps_.size()) throw ConfigError("snapshot index out of range");
  if (!file_backed_) return in_memory_[i];
  return load_checkpoint(files_[i]).params;
}

void Trajectory::use_directory(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  dir_ = dir;
  file_backed_ = true;
}

void Trajectory::add_snapshot(const NetworkParams& p, int step) {
  snapshot_steps_.push_back(step);
  if (!file_backed_) {
    in_memory_.push_back(p);
    return;
  }
  std::filesystem::path file = dir_ / ("step-" + std::to_string(step) + ".ckpt");
  save_checkpoint(p, step, file);
  files_.push_back(file);
}

void Trajectory::write_csv(const std::filesystem::path& file) const {
  std::ofstream out(file);
  if (!out) throw ConfigError("cannot open " + file.string() + " for writing");
  out << "step,train_loss,dist_from_init,dist_from_ref,grad_norm\n";
  for (const TrajectoryRow& r : rows)
    out << r.step << ',' << format17(r.train_loss) << ',' << format17(r.dist_from_init) << ','
        << format17(r.dist_from_ref) << ',' << format17(r.grad_norm) << '\n';
}

Trajectory train(const NetworkParams& start, const LabeledDataset& data, const TrainConfig& cfg,
                 const NetworkParams* reference) {
  if (cfg.steps < 0) throw ConfigError("steps must be >= 0");
  if (!(cfg.step_size > 0.0)) throw ConfigError("step_size must be > 0");
  data.validate();

  Trajectory traj;
  double guard = 4.0 / (5.0 * static_cast<double>(start.config.depth));
  if (cfg.guard_step_size && cfg.step_size > guard)
    traj.notes.push_back("step_size " + format17(cfg.step_size) + " exceeds 4/(5*depth) = " +
                         format17(guard) + "; the descent guarantee may not apply");

  if (!cfg.snapshot_dir.empty()) {
    traj.use_directory(cfg.snapshot_dir);
  } else if (start.config.width > 1024) {
    std::filesystem::path dir = fresh_temp_dir();
    traj.use_directory(dir);
    traj.notes.push_back("snapshots written to " + dir.string());
  }

  NetworkParams w = start;
  double nan = std::numeric_limits<double>::quiet_NaN();
  for (int step = 0; step <= cfg.steps; ++step) {
    RiskGrad rg = risk_and_gradient(w, data);

    TrajectoryRow row;
    row.step = step;
    row.train_loss = rg.risk;
    row.dist_from_init = frobenius_distance(w, start);
    row.dist_from_ref = reference ? frobenius_distance(w, *reference) : nan;
    row.grad_norm = rg.grads.frobenius();
    traj.rows.push_back(row);

    bool periodic = cfg.snapshot_every > 0 && step % cfg.snapshot_every == 0;
    if (step == 0 || step == cfg.steps || periodic) traj.add_snapshot(w, step);

    if (rg.risk > cfg.divergence_threshold) {
      traj.diverged = true;
      traj.notes.push_back("risk " + format17(rg.risk) +
                           " exceeded the divergence threshold at step " + std::to_string(step));
      break;
    }
    if (step == cfg.steps) break;
    for (std::size_t l = 0; l < w.layers.size(); ++l) {
      double* wp = w.layers[l].data();
      const double* gp = rg.grads.layers[l].data();
      for (std::size_t i = 0; i < w.layers[l].size(); ++i) wp[i] -= cfg.step_size * gp[i];
    }
  }
  return traj;
}

ObjectiveBound eval_F_S(const NetworkParams& reference, const NetworkParams& init,
                        const LabeledDataset& data, double step_size, int steps) {
  ObjectiveBound b;
  b.reference_risk = empirical_risk(reference, data);
  b.squared_distance = squared_frobenius_distance(init, reference);
  b.value = 3.0 * step_size * static_cast<double>(steps) * b.reference_risk + b.squared_distance;
  b.at_least_one = b.value >= 1.0;
  return b;
}

double eval_Ftilde_S(const NetworkParams& reference, const LabeledDataset& data) {
  if (data.size() == 0) throw ConfigError("empty dataset");
  long double acc = 0.0L;
  for (std::size_t i = 0; i < data.size(); ++i)
    acc += std::abs(logistic_loss_grad(data.labels[i] * forward(reference, data.point(i))));
  return static_cast<double>(acc / static_cast<long double>(data.size()));
}

}  // namespace ntklab
