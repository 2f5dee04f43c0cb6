#include "splitinfer/tensor.hpp"

#include <cmath>
#include <utility>

#include "splitinfer/error.hpp"

namespace splitinfer {

size_t NumElements(const Shape& shape) {
  size_t n = 1;
  for (size_t d : shape) n *= d;
  return n;
}

std::string ShapeString(const Shape& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

static void CheckShape(const Shape& shape) {
  if (shape.empty()) throw Error(ErrorCode::kShapeMismatch, "empty shape");
  for (size_t d : shape) {
    if (d == 0) {
      throw Error(ErrorCode::kShapeMismatch,
                  "zero-sized dimension in " + ShapeString(shape));
    }
  }
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  CheckShape(shape_);
  data_.assign(NumElements(shape_), 0.0f);
}

Tensor::Tensor(Shape shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  CheckShape(shape_);
  if (NumElements(shape_) != data_.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                "shape " + ShapeString(shape_) + " needs " +
                    std::to_string(NumElements(shape_)) + " elements, got " +
                    std::to_string(data_.size()));
  }
}

bool Tensor::AllFinite() const {
  for (float v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace splitinfer
