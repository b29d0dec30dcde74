#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "xdom/error.hpp"

namespace xdom {

// Dense row-major tensor (rank <= 4 in practice: NCHW activations, OIHW
// weights, matrices, vectors). Value semantics; storage is always packed.
template <class T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int64_t> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<size_t>(count(shape_)), T(0));
  }
  Tensor(std::initializer_list<int64_t> shape) : Tensor(std::vector<int64_t>(shape)) {}

  static Tensor full(std::vector<int64_t> shape, T value) {
    Tensor t(std::move(shape));
    t.fill(value);
    return t;
  }

  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // Flat offset helpers for the common ranks.
  int64_t offset(int64_t a, int64_t b) const { return a * shape_[1] + b; }
  int64_t offset(int64_t a, int64_t b, int64_t c) const {
    return (a * shape_[1] + b) * shape_[2] + c;
  }
  int64_t offset(int64_t a, int64_t b, int64_t c, int64_t d) const {
    return ((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d;
  }
  T& at(int64_t a, int64_t b) { return data_[static_cast<size_t>(offset(a, b))]; }
  const T& at(int64_t a, int64_t b) const { return data_[static_cast<size_t>(offset(a, b))]; }
  T& at(int64_t a, int64_t b, int64_t c, int64_t d) {
    return data_[static_cast<size_t>(offset(a, b, c, d))];
  }
  const T& at(int64_t a, int64_t b, int64_t c, int64_t d) const {
    return data_[static_cast<size_t>(offset(a, b, c, d))];
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  void zero() { fill(T(0)); }

  // Reinterpret the storage under a new shape with identical element count.
  void reshape(std::vector<int64_t> shape) {
    if (count(shape) != numel()) {
      throw ShapeError(msg("reshape from ", numel(), " elements to shape with ", count(shape)));
    }
    shape_ = std::move(shape);
  }

  bool all_finite() const {
    for (const T& v : data_) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

  template <class U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    for (int64_t i = 0; i < numel(); ++i) out[i] = static_cast<U>(data_[static_cast<size_t>(i)]);
    return out;
  }

 private:
  static int64_t count(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t d : shape) {
      if (d < 0) throw ShapeError("negative tensor dimension");
      n *= d;
    }
    return n;
  }

  std::vector<int64_t> shape_;
  std::vector<T> data_;
};

inline std::string shape_string(const std::vector<int64_t>& s) {
  std::string out = "(";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  out += ")";
  return out;
}

}  // namespace xdom
