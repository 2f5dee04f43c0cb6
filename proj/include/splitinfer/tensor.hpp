#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace splitinfer {

using Shape = std::vector<size_t>;

size_t NumElements(const Shape& shape);

// Dense FP32 tensor in row-major order. The constructor enforces
// product(shape) == data.size() and that every dimension is >= 1.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<float> data);

  const Shape& shape() const { return shape_; }
  size_t dim(size_t i) const { return shape_.at(i); }
  size_t rank() const { return shape_.size(); }
  size_t size() const { return data_.size(); }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }
  std::vector<float>& vec() { return data_; }
  const std::vector<float>& vec() const { return data_; }

  float& operator[](size_t i) { return data_[i]; }
  float operator[](size_t i) const { return data_[i]; }

  bool AllFinite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<float> data_;
};

std::string ShapeString(const Shape& shape);

}  // namespace splitinfer
