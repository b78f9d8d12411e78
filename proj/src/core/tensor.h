#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace treeseq {

// Row-major matrix used by the model kernels.
template <typename T>
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> v;

  Mat() = default;
  Mat(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, T(0)) {}

  T* row(std::size_t i) { return v.data() + i * cols; }
  const T* row(std::size_t i) const { return v.data() + i * cols; }
  T& at(std::size_t i, std::size_t j) { return v[i * cols + j]; }
  T at(std::size_t i, std::size_t j) const { return v[i * cols + j]; }
};

// y = x W + b with W stored [in x out].
template <typename T>
void linear_forward(const Mat<T>& x, const T* w, const T* b, std::size_t out,
                    Mat<T>& y) {
  const std::size_t in = x.cols;
  y = Mat<T>(x.rows, out);
  for (std::size_t i = 0; i < x.rows; ++i) {
    T* yr = y.row(i);
    std::copy(b, b + out, yr);
    const T* xr = x.row(i);
    for (std::size_t k = 0; k < in; ++k) {
      const T a = xr[k];
      const T* wr = w + k * out;
      for (std::size_t j = 0; j < out; ++j) yr[j] += a * wr[j];
    }
  }
}

// Accumulates dW, db and (if dx is non-null) dx for y = x W + b.
template <typename T>
void linear_backward(const Mat<T>& x, const T* w, const Mat<T>& dy, T* dw,
                     T* db, Mat<T>* dx) {
  const std::size_t in = x.cols, out = dy.cols;
  for (std::size_t i = 0; i < x.rows; ++i) {
    const T* dyr = dy.row(i);
    const T* xr = x.row(i);
    for (std::size_t j = 0; j < out; ++j) db[j] += dyr[j];
    for (std::size_t k = 0; k < in; ++k) {
      const T a = xr[k];
      T* dwr = dw + k * out;
      for (std::size_t j = 0; j < out; ++j) dwr[j] += a * dyr[j];
    }
    if (dx) {
      T* dxr = dx->row(i);
      for (std::size_t k = 0; k < in; ++k) {
        const T* wr = w + k * out;
        T acc = 0;
        for (std::size_t j = 0; j < out; ++j) acc += wr[j] * dyr[j];
        dxr[k] += acc;
      }
    }
  }
}

template <typename T>
void add_into(Mat<T>& dst, const Mat<T>& src) {
  for (std::size_t i = 0; i < dst.v.size(); ++i) dst.v[i] += src.v[i];
}

}  // namespace treeseq
