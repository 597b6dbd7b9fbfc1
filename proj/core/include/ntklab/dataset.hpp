#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ntklab/matrix.hpp"
#include "ntklab/network.hpp"

namespace ntklab {

struct LabeledDataset {
  Matrix points;               // n x d, rows unit norm
  std::vector<double> labels;  // +-1

  std::size_t size() const { return labels.size(); }
  int dim() const { return static_cast<int>(points.cols()); }
  std::span<const double> point(std::size_t i) const { return points.row_span(i); }

  void validate() const;  // shapes, unit rows, +-1 labels
};

// Noisy two-coordinate parity distribution on the unit sphere in dimension
// dim >= 3. Exactly one of the first two coordinates is +-1/sqrt(dim-1), the
// other is 0; the label is +1 when the first coordinate is the live one and -1
// when the second is. The remaining dim-2 coordinates are independent signs
// +-1/sqrt(dim-1), so every point has unit norm in closed form.
struct XorSpec {
  int dim = 3;
  std::uint64_t seed = 0;

  void validate() const;
};

LabeledDataset xor_sample(const XorSpec& spec, std::size_t n);

// Full support of the distribution: 4 * 2^(dim-2) = 2^dim equally likely
// points, in a fixed order. dim <= 22.
LabeledDataset xor_population(int dim);

// i.i.d. uniform points on the unit sphere via normalized Gaussians, labels +1.
// Point i comes from sub-stream i, so a longer sample extends a shorter one.
LabeledDataset sphere_sample(int dim, std::size_t n, std::uint64_t seed);

struct PopulationMetrics {
  double zero_one_error;  // counts y * f(x) <= 0 as an error, so f == 0 is wrong
  double logistic_risk;
};

PopulationMetrics population_metrics(const NetworkParams& p, const LabeledDataset& population);

// CSV with dim coordinate columns then the label column, 17 significant digits.
void save_dataset_csv(const LabeledDataset& data, const std::filesystem::path& file);
LabeledDataset load_dataset_csv(const std::filesystem::path& file);

}  // namespace ntklab
