#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace bnas {

using Shape = std::vector<std::size_t>;

/// Allocator whose value-less construct() leaves floats uninitialized.
template <class T>
struct DefaultInitAllocator : std::allocator<T> {
  template <class U>
  struct rebind {
    using other = DefaultInitAllocator<U>;
  };
  DefaultInitAllocator() = default;
  template <class U>
  DefaultInitAllocator(const DefaultInitAllocator<U>&) noexcept {}
  template <class U>
  void construct(U* p) noexcept {
    ::new (static_cast<void*>(p)) U;
  }
  template <class U, class... Args>
  void construct(U* p, Args&&... args) {
    ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
  }
};

std::size_t shape_numel(const Shape& dims);
std::string shape_string(const Shape& dims);

/// Dense row-major float32 tensor. 4-D tensors are NCHW.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape dims, float fill = 0.0f);
  Tensor(Shape dims, const std::vector<float>& data);
  /// Contents are unspecified until written.
  static Tensor uninitialized(Shape dims);

  const Shape& dims() const noexcept { return dims_; }
  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t dim(std::size_t axis) const { return dims_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }
  float* ptr() noexcept { return data_.data(); }
  const float* ptr() const noexcept { return data_.data(); }

  float& operator[](std::size_t i) noexcept { return data_[i]; }
  float operator[](std::size_t i) const noexcept { return data_[i]; }

  /// Element access for 4-D tensors.
  float& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w);
  float at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const;

  void fill(float value);
  /// Same data, new dims of equal element count.
  Tensor reshaped(Shape dims) const;

  bool operator==(const Tensor& other) const = default;

 private:
  Shape dims_;
  std::vector<float, DefaultInitAllocator<float>> data_;
};

/// Throws ShapeError naming `what` unless both dims are equal.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

}  // namespace bnas
