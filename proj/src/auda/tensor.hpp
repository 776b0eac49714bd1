#pragma once
// Dense row-major tensor.  Shapes used in practice are [B,D] matrices and
// [B,C,H,W] image stacks; the class itself is rank-agnostic.

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace auda {

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0))
      : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}
  Tensor(std::initializer_list<std::size_t> shape, T fill = T(0))
      : Tensor(Shape(shape), fill) {}

  const Shape& shape() const { return shape_; }
  std::size_t numel() const { return data_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t rank() const { return shape_.size(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  // [B,D] access
  T& at2(std::size_t b, std::size_t d) { return data_[b * shape_[1] + d]; }
  const T& at2(std::size_t b, std::size_t d) const {
    return data_[b * shape_[1] + d];
  }

  // [B,C,H,W] access
  T& at4(std::size_t b, std::size_t c, std::size_t y, std::size_t x) {
    return data_[((b * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
  }
  const T& at4(std::size_t b, std::size_t c, std::size_t y,
               std::size_t x) const {
    return data_[((b * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  Tensor<T> reshaped(Shape s) const {
    if (shape_numel(s) != numel())
      throw std::invalid_argument("reshape: numel mismatch " + shape_str(s) +
                                  " vs " + shape_str(shape_));
    Tensor<T> out = *this;
    out.shape_ = std::move(s);
    return out;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    for (std::size_t i = 0; i < numel(); ++i)
      out[i] = static_cast<U>(data_[i]);
    return out;
  }

  bool same_shape(const Tensor<T>& o) const { return shape_ == o.shape_; }

 private:
  Shape shape_;
  std::vector<T> data_;
};

template <typename T>
inline void check_same_shape(const Tensor<T>& a, const Tensor<T>& b,
                             const char* who) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(who) + ": shape mismatch " +
                                shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
}

}  // namespace auda
