#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "fun/errors.hpp"

namespace fun::nn {

using Shape = std::vector<std::size_t>;

inline std::string to_string(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ")";
  return os.str();
}

inline std::size_t element_count(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

// Dense row-major tensor. Activations are NCHW.
template <class T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape dims, T fill = T{0}) : dims_(std::move(dims)) {
    require(!dims_.empty(), ErrorKind::dimension, "tensor needs at least one extent");
    for (std::size_t d : dims_) {
      if (!(d >= 1)) fail(ErrorKind::dimension, "tensor extents must be >= 1: " + to_string(dims_));
    }
    data_.assign(element_count(dims_), fill);
  }
  Tensor(Shape dims, std::vector<T> values) : Tensor(std::move(dims)) {
    if (!(values.size() == data_.size())) fail(ErrorKind::dimension,
            "value count does not match shape " + to_string(dims_));
    data_ = std::move(values);
  }

  template <class U>
  static Tensor cast_from(const Tensor<U>& other) {
    Tensor t(other.dims());
    std::transform(other.data().begin(), other.data().end(), t.data_.begin(),
                   [](U v) { return static_cast<T>(v); });
    return t;
  }

  const Shape& dims() const { return dims_; }
  std::size_t rank() const { return dims_.size(); }
  std::size_t dim(std::size_t i) const { return dims_[i]; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  // NCHW accessors.
  std::size_t n() const { return dims_[0]; }
  std::size_t c() const { return dims_[1]; }
  std::size_t h() const { return dims_[2]; }
  std::size_t w() const { return dims_[3]; }
  T& at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) {
    return data_[((n * dims_[1] + c) * dims_[2] + y) * dims_[3] + x];
  }
  const T& at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
    return data_[((n * dims_[1] + c) * dims_[2] + y) * dims_[3] + x];
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  void zero() { fill(T{0}); }

  Tensor reshaped(Shape dims) const {
    require(element_count(dims) == data_.size(), ErrorKind::dimension, "reshape changes element count");
    Tensor t = *this;
    t.dims_ = std::move(dims);
    return t;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape dims_;
  std::vector<T> data_;
};

template <class T>
void require_same_dims(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  if (!(a.dims() == b.dims())) fail(ErrorKind::dimension,
          std::string(what) + ": " + to_string(a.dims()) + " vs " + to_string(b.dims()));
}

template <class T>
void require_rank(const Tensor<T>& a, std::size_t r, const char* what) {
  if (!(a.rank() == r)) fail(ErrorKind::dimension,
          std::string(what) + ": expected rank " + std::to_string(r) + ", got " + to_string(a.dims()));
}

template <class T>
void add_inplace(Tensor<T>& a, const Tensor<T>& b) {
  require_same_dims(a, b, "add");
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < ad.size(); ++i) ad[i] += bd[i];
}

template <class T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Tensor<T> v) : name(std::move(n)), value(std::move(v)), grad(value.dims()) {}

  void zero_grad() { grad.zero(); }
};

}  // namespace fun::nn
