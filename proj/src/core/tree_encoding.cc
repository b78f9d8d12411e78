#include "tree_encoding.h"

#include <cmath>

#include "error.h"

namespace treeseq {

void EncodingConfig::validate() const {
  if (d_idx == 0 || d_idx % 2 != 0) {
    fail("d_idx must be a positive even number, got " + std::to_string(d_idx));
  }
  if (path_len == 0) fail("edge path length must be positive");
}

namespace {

double frequency(std::size_t i, std::size_t width) {
  return std::pow(10000.0, -2.0 * static_cast<double>(i) /
                               static_cast<double>(width));
}

void write_index_block(std::int64_t idx, std::size_t d_idx, double* out) {
  for (std::size_t i = 0; i < d_idx / 2; ++i) {
    const double angle = frequency(i, d_idx) * static_cast<double>(idx);
    out[2 * i] = std::sin(angle);
    out[2 * i + 1] = std::cos(angle);
  }
}

}  // namespace

std::vector<double> encode_index(std::int64_t idx, std::size_t d_idx) {
  EncodingConfig{d_idx, 1}.validate();
  std::vector<double> out(d_idx);
  write_index_block(idx, d_idx, out.data());
  return out;
}

std::vector<double> encode_path(const EdgePath& path,
                                const EncodingConfig& cfg) {
  cfg.validate();
  if (path.size() != cfg.path_len) {
    fail("edge path has length " + std::to_string(path.size()) +
         ", expected " + std::to_string(cfg.path_len));
  }
  std::vector<double> out(cfg.d_model());
  for (std::size_t l = 0; l < cfg.path_len; ++l) {
    write_index_block(path[l], cfg.d_idx, out.data() + l * cfg.d_idx);
  }
  return out;
}

DenseMatrix encode_paths(const std::vector<EdgePath>& paths,
                         const EncodingConfig& cfg) {
  DenseMatrix m{paths.size(), cfg.d_model(), {}};
  m.data.reserve(m.rows * m.cols);
  for (const EdgePath& p : paths) {
    std::vector<double> row = encode_path(p, cfg);
    m.data.insert(m.data.end(), row.begin(), row.end());
  }
  return m;
}

std::vector<double> sequential_encoding(std::size_t pos, std::size_t d_model) {
  std::vector<double> out(d_model);
  for (std::size_t i = 0; 2 * i < d_model; ++i) {
    const double angle = frequency(i, d_model) * static_cast<double>(pos);
    out[2 * i] = std::sin(angle);
    if (2 * i + 1 < d_model) out[2 * i + 1] = std::cos(angle);
  }
  return out;
}

DenseMatrix sibling_rotation(std::int64_t offset, std::size_t d_idx) {
  EncodingConfig{d_idx, 1}.validate();
  DenseMatrix m{d_idx, d_idx, std::vector<double>(d_idx * d_idx, 0.0)};
  // [sin(a+b)]   [ cos b  sin b] [sin a]
  // [cos(a+b)] = [-sin b  cos b] [cos a]
  for (std::size_t i = 0; i < d_idx / 2; ++i) {
    const double angle = frequency(i, d_idx) * static_cast<double>(offset);
    const double c = std::cos(angle), s = std::sin(angle);
    m.at(2 * i, 2 * i) = c;
    m.at(2 * i, 2 * i + 1) = s;
    m.at(2 * i + 1, 2 * i) = -s;
    m.at(2 * i + 1, 2 * i + 1) = c;
  }
  return m;
}

std::vector<double> apply(const DenseMatrix& m, const std::vector<double>& v) {
  if (v.size() != m.cols) fail("dimension mismatch in matrix-vector product");
  std::vector<double> out(m.rows, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < m.cols; ++c) acc += m.at(r, c) * v[c];
    out[r] = acc;
  }
  return out;
}

}  // namespace treeseq
