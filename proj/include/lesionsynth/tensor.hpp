#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace lesionsynth {

// Dense n-d array, row-major (last dimension fastest), backed by an
// Eigen array so elementwise math stays expression-friendly.
template <typename T>
class Tensor {
 public:
  using Scalar = T;
  using Storage = Eigen::Array<T, Eigen::Dynamic, 1>;

  Tensor() = default;

  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_ = Storage::Zero(count(shape_));
  }

  Tensor(std::vector<int> shape, Storage data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != count(shape_))
      throw std::invalid_argument("tensor: data size does not match shape");
  }

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

  static Tensor constant(std::vector<int> shape, T value) {
    Tensor t(std::move(shape));
    t.data_.setConstant(value);
    return t;
  }

  static int64_t count(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) {
      if (d < 0) throw std::invalid_argument("tensor: negative dimension");
      n *= d;
    }
    return n;
  }

  const std::vector<int>& shape() const { return shape_; }
  int dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int64_t size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  Storage& array() { return data_; }
  const Storage& array() const { return data_; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](int64_t i) { return data_[i]; }
  T operator[](int64_t i) const { return data_[i]; }

  // 4-d accessor (N,C,H,W); also works for 3-d (C,H,W) via at3.
  T& at4(int n, int c, int y, int x) {
    return data_[((static_cast<int64_t>(n) * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
  }
  T at4(int n, int c, int y, int x) const {
    return data_[((static_cast<int64_t>(n) * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
  }
  T& at3(int c, int y, int x) {
    return data_[(static_cast<int64_t>(c) * shape_[1] + y) * shape_[2] + x];
  }
  T at3(int c, int y, int x) const {
    return data_[(static_cast<int64_t>(c) * shape_[1] + y) * shape_[2] + x];
  }

  Tensor reshaped(std::vector<int> shape) const {
    if (count(shape) != size())
      throw std::invalid_argument("tensor: reshape count mismatch");
    return Tensor(std::move(shape), data_);
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const { return data_.isFinite().all(); }

 private:
  std::vector<int> shape_;
  Storage data_;
};

using Tensorf = Tensor<float>;
using Tensord = Tensor<double>;

}  // namespace lesionsynth
