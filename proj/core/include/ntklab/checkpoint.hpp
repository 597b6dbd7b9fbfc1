#pragma once

#include <filesystem>

#include "ntklab/network.hpp"

namespace ntklab {

// Single-file format: one JSON header line (version, shape, seed, step, byte
// offsets into the payload), then raw little-endian float64 arrays, row-major,
// layers W^1..W^L followed by out_signs. Round-trips are bit-exact.
void save_checkpoint(const NetworkParams& p, int step, const std::filesystem::path& file);

struct Checkpoint {
  NetworkParams params;
  int step = 0;
};

// Throws ConfigError naming the offending field on truncation, shape or
// version mismatch.
Checkpoint load_checkpoint(const std::filesystem::path& file);

// Same format for a bare matrix (header line with rows/cols, then the raw
// row-major payload). Used for artifacts that are a single weight block, like
// a margin-maximizing direction.
void save_matrix_checkpoint(const Matrix& m, const std::filesystem::path& file);
Matrix load_matrix_checkpoint(const std::filesystem::path& file);

}  // namespace ntklab
