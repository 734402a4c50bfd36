#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace wqoe {

/// Dense row-major float64 array of rank 1..3.
///
/// Sequences are [channels, time]. The batched rank-3 layout used by the
/// training path is [channels, time, batch]: the batch axis is innermost so
/// kernels stream contiguous memory.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> extents);
  Tensor(std::vector<std::size_t> extents, std::vector<double> values);

  static Tensor zeros(std::vector<std::size_t> extents) {
    return Tensor(std::move(extents));
  }
  /// Rank-1 tensor from a plain vector.
  static Tensor row(std::vector<double> values);

  std::size_t numel() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }

  double& at(std::size_t i) { return data[i]; }
  double at(std::size_t i) const { return data[i]; }
  double& at(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }
  double& at(std::size_t i, std::size_t j, std::size_t k) {
    return data[(i * shape[1] + j) * shape[2] + k];
  }
  double at(std::size_t i, std::size_t j, std::size_t k) const {
    return data[(i * shape[1] + j) * shape[2] + k];
  }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  bool all_finite() const;
  void fill(double v);
  std::string shape_str() const;  // "[4, 8]"
};

std::size_t shape_numel(const std::vector<std::size_t>& extents);

}  // namespace wqoe
