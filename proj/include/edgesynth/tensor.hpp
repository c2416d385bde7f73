#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "edgesynth/common.hpp"

namespace edgesynth {

// Dense row-major tensor. Arithmetic everywhere is double; the NTF1 wire
// format rounds to f32 at the I/O boundary.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(static_cast<size_t>(numel_of(shape)), 0.0);
  }
  Tensor(std::vector<int> s, std::vector<double> d)
      : shape(std::move(s)), data(std::move(d)) {
    ES_CHECK(static_cast<int64_t>(data.size()) == numel_of(shape),
             "tensor data/shape mismatch");
  }

  static int64_t numel_of(const std::vector<int>& s) {
    int64_t n = 1;
    for (int d : s) n *= d;
    return n;
  }

  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
  static Tensor full(std::vector<int> s, double v) {
    Tensor t(std::move(s));
    for (auto& x : t.data) x = v;
    return t;
  }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }

  // 2D accessors (most of the model works on [rows, cols] matrices)
  int rows() const { return shape.at(0); }
  int cols() const { return rank() >= 2 ? shape.at(1) : 1; }
  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols() + c]; }
  double at(int r, int c) const {
    return data[static_cast<size_t>(r) * cols() + c];
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  std::string shape_str() const {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
      if (i) s += "x";
      s += std::to_string(shape[i]);
    }
    return s + "]";
  }
};

}  // namespace edgesynth
