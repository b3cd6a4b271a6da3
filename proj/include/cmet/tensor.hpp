#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "cmet/errors.hpp"

namespace cmet {

using Shape = std::vector<int>;

inline size_t shape_numel(const Shape& shape) {
  size_t n = 1;
  for (const int e : shape) {
    if (e <= 0) throw shape_error("non-positive extent in shape");
    n *= static_cast<size_t>(e);
  }
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

// Dense row-major tensor. Rank 1 for vectors, rank 2 for token/frame
// matrices, rank 3 for conv kernels. Plain value type; the autodiff graph
// lives in autodiff.hpp.
template <class S>
struct Tensor {
  Shape shape;
  std::vector<S> data;

  Tensor() = default;

  explicit Tensor(Shape s) : shape(std::move(s)), data(shape_numel(shape), S(0)) {}

  Tensor(Shape s, std::vector<S> values) : shape(std::move(s)), data(std::move(values)) {
    if (data.size() != shape_numel(shape))
      throw shape_error("data size does not match shape " + shape_str(shape));
  }

  static Tensor zeros(Shape s) { return Tensor(std::move(s)); }

  static Tensor full(Shape s, S v) {
    Tensor t(std::move(s));
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
  }

  static Tensor row(std::vector<S> values) {
    const int n = static_cast<int>(values.size());
    return Tensor({n}, std::move(values));
  }

  size_t numel() const { return data.size(); }
  int rank() const { return static_cast<int>(shape.size()); }

  // Rows/cols view of rank-1 and rank-2 tensors: a rank-1 vector counts as a
  // single row.
  int rows() const {
    if (rank() == 1) return 1;
    if (rank() == 2) return shape[0];
    throw shape_error("rows() needs rank 1 or 2, got " + shape_str(shape));
  }
  int cols() const {
    if (rank() == 1) return shape[0];
    if (rank() == 2) return shape[1];
    throw shape_error("cols() needs rank 1 or 2, got " + shape_str(shape));
  }

  S& at(int i) { return data[static_cast<size_t>(i)]; }
  S at(int i) const { return data[static_cast<size_t>(i)]; }
  S& at(int i, int j) { return data[static_cast<size_t>(i) * cols() + j]; }
  S at(int i, int j) const { return data[static_cast<size_t>(i) * cols() + j]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (const S v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  template <class T>
  Tensor<T> cast() const {
    Tensor<T> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<T>(data[i]);
    return out;
  }
};

template <class S>
void check_same_shape(const Tensor<S>& a, const Tensor<S>& b, const char* op) {
  if (!a.same_shape(b))
    throw shape_error(std::string(op) + ": shape mismatch " + shape_str(a.shape) + " vs " +
                      shape_str(b.shape));
}

}  // namespace cmet
