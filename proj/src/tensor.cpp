#include "mosaic/tensor.hpp"

#include <cmath>

#include "mosaic/error.hpp"

namespace mosaic {

std::string TensorShape::str() const {
  return std::to_string(h) + "x" + std::to_string(w) + "x" + std::to_string(c);
}

Tensor::Tensor(TensorShape shape, float fill) : shape_(shape) {
  if (!shape.valid()) throw ShapeError("invalid tensor shape " + shape.str());
  data_.assign(shape.elements(), fill);
}

Tensor::Tensor(TensorShape shape, std::vector<float> data)
    : shape_(shape), data_(std::move(data)) {
  if (!shape.valid()) throw ShapeError("invalid tensor shape " + shape.str());
  if (data_.size() != shape.elements()) {
    throw ShapeError("buffer of " + std::to_string(data_.size()) +
                     " values does not match shape " + shape.str());
  }
}

bool Tensor::all_finite() const {
  for (float v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace mosaic
