#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "edge_paths.h"

namespace treeseq {

struct EncodingConfig {
  std::size_t d_idx = 4;     // per-index width, even
  std::size_t path_len = 16;

  std::size_t d_model() const { return d_idx * path_len; }
  void validate() const;
};

// Row-major dense matrix of doubles.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

// Sinusoidal block for one edge index:
// [2i] = sin(w_i * idx), [2i+1] = cos(w_i * idx), w_i = 10000^(-2i/d_idx).
std::vector<double> encode_index(std::int64_t idx, std::size_t d_idx);

// Concatenation of encode_index over the path entries.
std::vector<double> encode_path(const EdgePath& path, const EncodingConfig& cfg);

// One encode_path row per path.
DenseMatrix encode_paths(const std::vector<EdgePath>& paths,
                         const EncodingConfig& cfg);

// Flat-position sinusoidal encoding over d_model dimensions.
std::vector<double> sequential_encoding(std::size_t pos, std::size_t d_model);

// Block-diagonal 2x2 rotations mapping encode_index(idx) to
// encode_index(idx + offset).
DenseMatrix sibling_rotation(std::int64_t offset, std::size_t d_idx);

std::vector<double> apply(const DenseMatrix& m, const std::vector<double>& v);

}  // namespace treeseq
