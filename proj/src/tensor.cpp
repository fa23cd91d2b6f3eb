#include "bnas/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <utility>

#include "bnas/error.hpp"

namespace bnas {

std::size_t shape_numel(const Shape& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& dims) {
  std::string out = "[";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(dims[i]);
  }
  return out + "]";
}

Tensor::Tensor(Shape dims, float fill) : dims_(std::move(dims)) {
  if (std::ranges::any_of(dims_, [](std::size_t d) { return d == 0; }))
    throw ShapeError("zero-sized dimension in " + shape_string(dims_));
  data_.assign(shape_numel(dims_), fill);
}

namespace {

void require_nonzero(const Shape& dims) {
  if (std::ranges::any_of(dims, [](std::size_t d) { return d == 0; }))
    throw ShapeError("zero-sized dimension in " + shape_string(dims));
}

}  // namespace

Tensor Tensor::uninitialized(Shape dims) {
  require_nonzero(dims);
  Tensor t;
  t.data_.resize(shape_numel(dims));
  t.dims_ = std::move(dims);
  return t;
}

Tensor::Tensor(Shape dims, const std::vector<float>& data) : dims_(std::move(dims)), data_(data.begin(), data.end()) {
  if (std::ranges::any_of(dims_, [](std::size_t d) { return d == 0; }))
    throw ShapeError("zero-sized dimension in " + shape_string(dims_));
  if (data_.size() != shape_numel(dims_))
    throw ShapeError("data length " + std::to_string(data_.size()) + " does not match dims " +
                     shape_string(dims_));
}

float& Tensor::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
  return data_[((n * dims_[1] + c) * dims_[2] + h) * dims_[3] + w];
}

float Tensor::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
  return data_[((n * dims_[1] + c) * dims_[2] + h) * dims_[3] + w];
}

void Tensor::fill(float value) { std::ranges::fill(data_, value); }

Tensor Tensor::reshaped(Shape dims) const {
  require_nonzero(dims);
  if (shape_numel(dims) != data_.size())
    throw ShapeError("cannot reshape " + shape_string(dims_) + " to " + shape_string(dims));
  Tensor t;
  t.dims_ = std::move(dims);
  t.data_ = data_;
  return t;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.dims() != b.dims())
    throw ShapeError(std::string(what) + ": " + shape_string(a.dims()) + " vs " + shape_string(b.dims()));
}

}  // namespace bnas
