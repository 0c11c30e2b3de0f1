#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/common.hpp"

namespace fednod {

// Dense row-major float32 tensor. The one numeric carrier in the engine.
struct Tensor {
  std::vector<std::int64_t> shape;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::int64_t> s);
  Tensor(std::vector<std::int64_t> s, std::vector<float> d);

  static std::int64_t numel_of(const std::vector<std::int64_t>& s);

  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
  std::size_t rank() const { return shape.size(); }
  std::int64_t dim(std::size_t axis) const;

  float* ptr() { return data.data(); }
  const float* ptr() const { return data.data(); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool bit_equal(const Tensor& o) const;
  bool all_finite() const;
  void fill(float v);

  Tensor reshaped(std::vector<std::int64_t> s) const;
};

std::string shape_str(const std::vector<std::int64_t>& s);

// Throws DimensionError naming `what` when shapes differ.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);
void require_rank(const Tensor& t, std::size_t rank, const char* what);

}  // namespace fednod
