#include "ntklab/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "ntklab/errors.hpp"
#include "ntklab/loss.hpp"
#include "ntklab/rng.hpp"

namespace ntklab {

void LabeledDataset::validate() const {
  if (points.rows() != labels.size())
    throw ConfigError("dataset has " + std::to_string(points.rows()) + " points but " +
                      std::to_string(labels.size()) + " labels");
  for (double y : labels)
    if (y != 1.0 && y != -1.0) throw ConfigError("labels must be +1 or -1");
  for (std::size_t i = 0; i < points.rows(); ++i) {
    double n = norm(points.row_span(i));
    if (std::abs(n - 1.0) > 1e-12)
      throw ConfigError("point " + std::to_string(i) + " has norm " + std::to_string(n));
  }
}

void XorSpec::validate() const {
  if (dim < 3) throw ConfigError("xor dim must be >= 3, got " + std::to_string(dim));
}

namespace {

// block: 0 -> (+s, 0, +1), 1 -> (0, +s, -1), 2 -> (-s, 0, +1), 3 -> (0, -s, -1)
void fill_xor_block(double* x, double& y, int block, double s) {
  x[0] = 0.0;
  x[1] = 0.0;
  switch (block) {
    case 0: x[0] = s; y = 1.0; break;
    case 1: x[1] = s; y = -1.0; break;
    case 2: x[0] = -s; y = 1.0; break;
    default: x[1] = -s; y = -1.0; break;
  }
}

}  // namespace

LabeledDataset xor_sample(const XorSpec& spec, std::size_t n) {
  spec.validate();
  int d = spec.dim;
  double s = 1.0 / std::sqrt(static_cast<double>(d - 1));
  LabeledDataset data;
  data.points = Matrix(n, d);
  data.labels.resize(n);
  CounterRng root(spec.seed);
  for (std::size_t i = 0; i < n; ++i) {
    CounterRng rng = root.stream(i);
    double* x = data.points.row(i);
    int block = static_cast<int>(rng.next_u64() & 3u);
    fill_xor_block(x, data.labels[i], block, s);
    for (int j = 2; j < d; ++j) x[j] = rng.next_sign() * s;
  }
  return data;
}

LabeledDataset xor_population(int dim) {
  XorSpec{dim, 0}.validate();
  if (dim > 22) throw ConfigError("xor population capped at dim 22, got " + std::to_string(dim));
  double s = 1.0 / std::sqrt(static_cast<double>(dim - 1));
  std::size_t tails = std::size_t{1} << (dim - 2);
  LabeledDataset data;
  data.points = Matrix(4 * tails, dim);
  data.labels.resize(4 * tails);
  std::size_t i = 0;
  for (int block = 0; block < 4; ++block) {
    for (std::size_t t = 0; t < tails; ++t, ++i) {
      double* x = data.points.row(i);
      fill_xor_block(x, data.labels[i], block, s);
      for (int j = 2; j < dim; ++j) x[j] = ((t >> (j - 2)) & 1u) ? s : -s;
    }
  }
  return data;
}

LabeledDataset sphere_sample(int dim, std::size_t n, std::uint64_t seed) {
  if (dim < 1) throw ConfigError("sphere dim must be >= 1");
  LabeledDataset data;
  data.points = Matrix(n, dim);
  data.labels.assign(n, 1.0);
  CounterRng root(seed);
  for (std::size_t i = 0; i < n; ++i) {
    CounterRng rng = root.stream(i);
    double* x = data.points.row(i);
    double nrm = 0.0;
    do {
      for (int j = 0; j < dim; ++j) x[j] = rng.next_gaussian();
      nrm = norm({x, static_cast<std::size_t>(dim)});
    } while (nrm == 0.0);
    for (int j = 0; j < dim; ++j) x[j] /= nrm;
  }
  return data;
}

PopulationMetrics population_metrics(const NetworkParams& p, const LabeledDataset& population) {
  if (population.size() == 0) throw ConfigError("population is empty");
  long double err = 0.0L;
  long double risk = 0.0L;
  for (std::size_t i = 0; i < population.size(); ++i) {
    double f = forward(p, population.point(i));
    double z = population.labels[i] * f;
    if (z <= 0.0) err += 1.0L;
    risk += logistic_loss(z);
  }
  double n = static_cast<double>(population.size());
  return {static_cast<double>(err) / n, static_cast<double>(risk) / n};
}

namespace {

std::string format17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void save_dataset_csv(const LabeledDataset& data, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw ConfigError("cannot open " + file.string() + " for writing");
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (int j = 0; j < data.dim(); ++j) out << format17(data.points(i, j)) << ',';
    out << format17(data.labels[i]) << '\n';
  }
}

LabeledDataset load_dataset_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open " + file.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ConfigError("bad number '" + cell + "' in " + file.string());
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError("empty dataset file " + file.string());
  std::size_t cols = rows[0].size();
  if (cols < 2) throw ConfigError("dataset rows need at least 2 columns");
  LabeledDataset data;
  data.points = Matrix(rows.size(), cols - 1);
  data.labels.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols)
      throw ConfigError("ragged row " + std::to_string(i) + " in " + file.string());
    for (std::size_t j = 0; j + 1 < cols; ++j) data.points(i, j) = rows[i][j];
    data.labels[i] = rows[i][cols - 1];
  }
  data.validate();
  return data;
}

}  // namespace ntklab
