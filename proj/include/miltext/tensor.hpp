#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace miltext {

// Error type thrown by every component in this library.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Dense row-major tensor of 64-bit floats. An empty shape denotes a scalar.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> values;

  Tensor() = default;

  static Tensor scalar(double v) {
    Tensor t;
    t.values.assign(1, v);
    return t;
  }
  static Tensor zeros(std::vector<int> shape);
  static Tensor filled(std::vector<int> shape, double v);
  static Tensor row(std::vector<double> v) {
    Tensor t;
    t.shape = {static_cast<int>(v.size())};
    t.values = std::move(v);
    return t;
  }
  static Tensor matrix(int rows, int cols, std::vector<double> v);

  std::int64_t numel() const {
    std::int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
  }
  int ndim() const { return static_cast<int>(shape.size()); }
  bool is_scalar() const { return shape.empty(); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }

  // 2-d accessors; at2 assumes shape {rows, cols}.
  double& at2(int i, int j) { return values[static_cast<size_t>(i) * shape[1] + j]; }
  double at2(int i, int j) const { return values[static_cast<size_t>(i) * shape[1] + j]; }

  double item() const {
    if (values.size() != 1) throw Error("Tensor::item: tensor is not a scalar, shape " + shape_str());
    return values[0];
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const;
  std::string shape_str() const;
};

inline std::string shape_to_string(const std::vector<int>& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  s += "]";
  return s;
}

}  // namespace miltext
