#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace vsgg {

// Dense row-major n-d array. Small and boring on purpose: the heavy math
// lives in the layers, not in a tensor expression system.
template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;

  Tensor() = default;

  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(static_cast<size_t>(count(shape)), T{0});
  }

  Tensor(std::vector<int> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != static_cast<size_t>(count(shape)))
      throw std::invalid_argument("tensor: data size does not match shape");
  }

  static int64_t count(const std::vector<int>& s) {
    int64_t n = 1;
    for (int d : s) {
      if (d < 0) throw std::invalid_argument("tensor: negative dimension");
      n *= d;
    }
    return n;
  }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  bool same_shape(const Tensor& other) const { return shape == other.shape; }

  T& at3(int i, int j, int k) {
    return data[(static_cast<size_t>(i) * shape[1] + j) * shape[2] + k];
  }
  const T& at3(int i, int j, int k) const {
    return data[(static_cast<size_t>(i) * shape[1] + j) * shape[2] + k];
  }

  T& at2(int i, int j) { return data[static_cast<size_t>(i) * shape[1] + j]; }
  const T& at2(int i, int j) const { return data[static_cast<size_t>(i) * shape[1] + j]; }

  bool all_finite() const {
    for (const T& v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  std::string shape_str() const {
    std::string s = "(";
    for (size_t i = 0; i < shape.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape[i]);
    }
    return s + ")";
  }
};

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + a.shape_str() +
                                " vs " + b.shape_str());
}

// (N, N, D) adjacency layout -> (D, N, N) channel-first for the conv stack.
template <typename T>
Tensor<T> to_channel_first(const Tensor<T>& a) {
  if (a.shape.size() != 3) throw std::invalid_argument("to_channel_first: need rank-3 tensor");
  const int n0 = a.shape[0], n1 = a.shape[1], d = a.shape[2];
  Tensor<T> out({d, n0, n1});
  for (int i = 0; i < n0; ++i)
    for (int j = 0; j < n1; ++j)
      for (int c = 0; c < d; ++c) out.at3(c, i, j) = a.at3(i, j, c);
  return out;
}

template <typename T>
Tensor<T> to_channel_last(const Tensor<T>& a) {
  if (a.shape.size() != 3) throw std::invalid_argument("to_channel_last: need rank-3 tensor");
  const int d = a.shape[0], n0 = a.shape[1], n1 = a.shape[2];
  Tensor<T> out({n0, n1, d});
  for (int c = 0; c < d; ++c)
    for (int i = 0; i < n0; ++i)
      for (int j = 0; j < n1; ++j) out.at3(i, j, c) = a.at3(c, i, j);
  return out;
}

}  // namespace vsgg
