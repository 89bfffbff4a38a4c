// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ioglm {

/// Dense vector of reals. Parameters are float; gradient checks run on double.
template <typename T>
class Vector {
public:
  Vector() = default;
  explicit Vector(std::size_t n, T fill = T(0)) : data_(n, fill) {}
  Vector(std::initializer_list<T> init) : data_(init) {}
  explicit Vector(std::vector<T> data) : data_(std::move(data)) {}

  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T &operator[](std::size_t i) { return data_[i]; }
  const T &operator[](std::size_t i) const { return data_[i]; }

  T *data() { return data_.data(); }
  const T *data() const { return data_.data(); }

  std::span<T> span() { return data_; }
  std::span<const T> span() const { return data_; }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }
  std::vector<T> &storage() { return data_; }
  const std::vector<T> &storage() const { return data_; }

  friend bool operator==(const Vector &, const Vector &) = default;

private:
  std::vector<T> data_;
};

/// Row-major dense matrix.
template <typename T>
class Matrix {
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T(0))
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T &operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T &operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  T *data() { return data_.data(); }
  const T *data() const { return data_.data(); }
  std::span<T> span() { return data_; }
  std::span<const T> span() const { return data_; }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  friend bool operator==(const Matrix &, const Matrix &) = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

/// Named view over one parameter array; used by optimizers, checksums,
/// serialization and the finite-difference oracle.
template <typename T>
struct TensorRef {
  std::string name;
  std::vector<std::size_t> shape;
  std::span<T> values;
};

template <typename T>
TensorRef<T> tensor_ref(std::string name, Matrix<T> &m) {
  return {std::move(name), {m.rows(), m.cols()}, m.span()};
}

template <typename T>
TensorRef<T> tensor_ref(std::string name, Vector<T> &v) {
  return {std::move(name), {v.size()}, v.span()};
}

template <typename To, typename From>
Vector<To> cast(const Vector<From> &v) {
  Vector<To> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<To>(v[i]);
  return out;
}

template <typename To, typename From>
Matrix<To> cast(const Matrix<From> &m) {
  Matrix<To> out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.size(); ++i)
    out.data()[i] = static_cast<To>(m.data()[i]);
  return out;
}

} // namespace ioglm
