// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ioglm/tensor.hpp"

namespace ioglm {

namespace detail {
inline std::string shape_str(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}
} // namespace detail

/// out = m * x. `out` must already have m.rows() entries.
template <typename T>
void matvec_into(const Matrix<T> &m, std::span<const T> x, std::span<T> out) {
  if (m.cols() != x.size() || m.rows() != out.size())
    throw std::invalid_argument("matvec: matrix " +
                                detail::shape_str(m.rows(), m.cols()) +
                                " vs vector " + std::to_string(x.size()) +
                                " -> " + std::to_string(out.size()));
  const std::size_t cols = m.cols();
  const T *a = m.data();
  const T *xv = x.data();
  for (std::size_t r = 0; r < m.rows(); ++r, a += cols) {
    // Eight fixed partial sums: vectorizes without reassociation flags and
    // keeps the summation order deterministic.
    T p[8] = {};
    std::size_t c = 0;
    for (; c + 8 <= cols; c += 8)
      for (std::size_t k = 0; k < 8; ++k) p[k] += a[c + k] * xv[c + k];
    T acc = ((p[0] + p[1]) + (p[2] + p[3])) + ((p[4] + p[5]) + (p[6] + p[7]));
    for (; c < cols; ++c) acc += a[c] * xv[c];
    out[r] = acc;
  }
}

template <typename T>
Vector<T> matvec(const Matrix<T> &m, const Vector<T> &v) {
  if (m.cols() != v.size())
    throw std::invalid_argument("matvec: matrix " +
                                detail::shape_str(m.rows(), m.cols()) +
                                " incompatible with vector of length " +
                                std::to_string(v.size()));
  Vector<T> out(m.rows());
  matvec_into(m, v.span(), out.span());
  return out;
}

/// dx += m^T * dy
template <typename T>
void matvec_transposed_accumulate(const Matrix<T> &m, std::span<const T> dy,
                                  std::span<T> dx) {
  if (m.rows() != dy.size() || m.cols() != dx.size())
    throw std::invalid_argument("matvec_transposed: matrix " +
                                detail::shape_str(m.rows(), m.cols()) +
                                " vs " + std::to_string(dy.size()) + " -> " +
                                std::to_string(dx.size()));
  const std::size_t cols = m.cols();
  const T *a = m.data();
  for (std::size_t r = 0; r < m.rows(); ++r, a += cols) {
    const T g = dy[r];
    if (g == T(0)) continue;
    for (std::size_t c = 0; c < cols; ++c) dx[c] += a[c] * g;
  }
}

/// dm += dy * x^T
template <typename T>
void outer_accumulate(Matrix<T> &dm, std::span<const T> dy,
                      std::span<const T> x) {
  if (dm.rows() != dy.size() || dm.cols() != x.size())
    throw std::invalid_argument("outer_accumulate: matrix " +
                                detail::shape_str(dm.rows(), dm.cols()) +
                                " vs " + std::to_string(dy.size()) + "x" +
                                std::to_string(x.size()));
  const std::size_t cols = dm.cols();
  T *a = dm.data();
  for (std::size_t r = 0; r < dm.rows(); ++r, a += cols) {
    const T g = dy[r];
    if (g == T(0)) continue;
    for (std::size_t c = 0; c < cols; ++c) a[c] += g * x[c];
  }
}

inline void require_finite(std::span<const float> v, const char *what) {
  for (float x : v)
    if (!std::isfinite(x))
      throw std::domain_error(std::string(what) + ": non-finite input");
}
inline void require_finite(std::span<const double> v, const char *what) {
  for (double x : v)
    if (!std::isfinite(x))
      throw std::domain_error(std::string(what) + ": non-finite input");
}

/// log(sum(exp(s))) accumulated in double.
template <typename T>
double log_sum_exp(std::span<const T> s) {
  double mx = -INFINITY;
  for (T x : s) mx = std::max(mx, static_cast<double>(x));
  double sum = 0.0;
  for (T x : s) sum += std::exp(static_cast<double>(x) - mx);
  return mx + std::log(sum);
}

template <typename T>
void softmax_into(std::span<const T> s, std::span<T> out) {
  double mx = -INFINITY;
  for (T x : s) mx = std::max(mx, static_cast<double>(x));
  double sum = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double e = std::exp(static_cast<double>(s[i]) - mx);
    out[i] = static_cast<T>(e);
    sum += e;
  }
  const double inv = 1.0 / sum;
  for (std::size_t i = 0; i < s.size(); ++i)
    out[i] = static_cast<T>(static_cast<double>(out[i]) * inv);
}

/// Max-subtracted softmax; throws on non-finite input.
template <typename T>
Vector<T> softmax_stable(const Vector<T> &s) {
  if (s.empty()) throw std::invalid_argument("softmax: empty input");
  require_finite(s.span(), "softmax");
  Vector<T> out(s.size());
  softmax_into<T>(s.span(), out.span());
  return out;
}

template <typename T>
T sigmoid(T x) {
  // Branch on sign so exp never overflows.
  if (x >= T(0)) {
    const T z = std::exp(-x);
    return T(1) / (T(1) + z);
  }
  const T z = std::exp(x);
  return z / (T(1) + z);
}

template <typename T>
Vector<T> sigmoid(const Vector<T> &v) {
  require_finite(v.span(), "sigmoid");
  Vector<T> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = sigmoid(v[i]);
  return out;
}

/// -log p[target] for an already-normalized distribution.
template <typename T>
double cross_entropy(const Vector<T> &p, std::size_t target) {
  if (target >= p.size())
    throw std::out_of_range("cross_entropy: target " + std::to_string(target) +
                            " out of range for distribution of size " +
                            std::to_string(p.size()));
  return -std::log(static_cast<double>(p[target]));
}

/// -log softmax(s)[target], evaluated in log space.
template <typename T>
double cross_entropy_from_logits(std::span<const T> s, std::size_t target) {
  if (target >= s.size())
    throw std::out_of_range("cross_entropy: target " + std::to_string(target) +
                            " out of range for logits of size " +
                            std::to_string(s.size()));
  return log_sum_exp(s) - static_cast<double>(s[target]);
}

using ScalarLoss = std::function<double(std::span<const double>)>;

/// Central-difference gradient of `loss` at `params`. When `coords` is
/// non-empty only those coordinates are differentiated (the rest of the
/// result stays zero).
std::vector<double>
finite_difference_gradient(const ScalarLoss &loss, std::span<const double> params,
                           double epsilon = 1e-6,
                           std::span<const std::size_t> coords = {});

/// max |a-b| / max(|a|, |b|, floor)
double relative_error(double a, double b, double floor = 1e-8);

} // namespace ioglm
