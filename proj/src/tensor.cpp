#include "miltext/tensor.hpp"

#include <cmath>

namespace miltext {

Tensor Tensor::zeros(std::vector<int> shape) {
  Tensor t;
  t.shape = std::move(shape);
  for (int d : t.shape) {
    if (d <= 0) throw Error("Tensor::zeros: nonpositive dimension in shape " + shape_to_string(t.shape));
  }
  t.values.assign(static_cast<size_t>(t.numel()), 0.0);
  return t;
}

Tensor Tensor::filled(std::vector<int> shape, double v) {
  Tensor t = zeros(std::move(shape));
  for (double& x : t.values) x = v;
  return t;
}

Tensor Tensor::matrix(int rows, int cols, std::vector<double> v) {
  if (static_cast<std::int64_t>(v.size()) != static_cast<std::int64_t>(rows) * cols)
    throw Error("Tensor::matrix: " + std::to_string(v.size()) + " values for shape [" + std::to_string(rows) +
                "," + std::to_string(cols) + "]");
  Tensor t;
  t.shape = {rows, cols};
  t.values = std::move(v);
  return t;
}

bool Tensor::all_finite() const {
  for (double v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string Tensor::shape_str() const { return shape_to_string(shape); }

}  // namespace miltext
