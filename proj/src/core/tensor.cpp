#include "core/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

namespace fednod {

std::int64_t Tensor::numel_of(const std::vector<std::int64_t>& s) {
  std::int64_t n = 1;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] <= 0) {
      throw DimensionError("tensor shape " + shape_str(s) + ": axis " +
                           std::to_string(i) + " is not positive");
    }
    n *= s[i];
  }
  return n;
}

Tensor::Tensor(std::vector<std::int64_t> s)
    : shape(std::move(s)), data(static_cast<std::size_t>(numel_of(shape)), 0.0f) {}

Tensor::Tensor(std::vector<std::int64_t> s, std::vector<float> d) : shape(std::move(s)) {
  std::int64_t n = numel_of(shape);
  if (n != static_cast<std::int64_t>(d.size())) {
    throw DimensionError("tensor " + shape_str(shape) + " expects " + std::to_string(n) +
                         " values, got " + std::to_string(d.size()));
  }
  data = std::move(d);
}

std::int64_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for tensor " +
                         shape_str(shape));
  }
  return shape[axis];
}

bool Tensor::bit_equal(const Tensor& o) const {
  if (shape != o.shape) return false;
  return std::memcmp(data.data(), o.data.data(), data.size() * sizeof(float)) == 0;
}

bool Tensor::all_finite() const {
  for (float v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::fill(float v) {
  for (float& x : data) x = v;
}

Tensor Tensor::reshaped(std::vector<std::int64_t> s) const {
  if (numel_of(s) != numel()) {
    throw DimensionError("cannot reshape " + shape_str(shape) + " to " + shape_str(s));
  }
  Tensor out;
  out.shape = std::move(s);
  out.data = data;
  return out;
}

std::string shape_str(const std::vector<std::int64_t>& s) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ", ";
    os << s[i];
  }
  os << ")";
  return os.str();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(what) + ": shape " + shape_str(a.shape) +
                         " does not match " + shape_str(b.shape));
  }
}

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(what) + ": expected rank " + std::to_string(rank) +
                         " input, got " + shape_str(t.shape));
  }
}

}  // namespace fednod
