#include "wqoe/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace wqoe {

std::size_t shape_numel(const std::vector<std::size_t>& extents) {
  std::size_t n = 1;
  for (std::size_t e : extents) n *= e;
  return n;
}

Tensor::Tensor(std::vector<std::size_t> extents)
    : shape(std::move(extents)), data(shape_numel(shape), 0.0) {
  if (shape.empty() || shape.size() > 3) {
    throw std::invalid_argument("tensor rank must be 1..3, got rank " +
                                std::to_string(shape.size()));
  }
}

Tensor::Tensor(std::vector<std::size_t> extents, std::vector<double> values)
    : shape(std::move(extents)), data(std::move(values)) {
  if (shape.empty() || shape.size() > 3) {
    throw std::invalid_argument("tensor rank must be 1..3, got rank " +
                                std::to_string(shape.size()));
  }
  if (shape_numel(shape) != data.size()) {
    throw std::invalid_argument("tensor shape " + shape_str() + " expects " +
                                std::to_string(shape_numel(shape)) +
                                " elements, got " + std::to_string(data.size()));
  }
}

Tensor Tensor::row(std::vector<double> values) {
  std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

bool Tensor::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::fill(double v) {
  for (double& x : data) x = v;
}

std::string Tensor::shape_str() const {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

}  // namespace wqoe
