// SPDX-License-Identifier: Apache-2.0
#include "ioglm/kernels.hpp"

#include <algorithm>
#include <numeric>

namespace ioglm {

std::vector<double>
finite_difference_gradient(const ScalarLoss &loss, std::span<const double> params,
                           double epsilon, std::span<const std::size_t> coords) {
  if (!(epsilon > 0.0))
    throw std::invalid_argument("finite_difference_gradient: epsilon must be > 0");

  std::vector<double> theta(params.begin(), params.end());
  const double first = loss(theta);
  const double second = loss(theta);
  if (first != second)
    throw std::runtime_error(
        "finite_difference_gradient: loss function is not deterministic");

  std::vector<std::size_t> all;
  if (coords.empty()) {
    all.resize(theta.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    coords = all;
  }

  std::vector<double> grad(theta.size(), 0.0);
  for (std::size_t i : coords) {
    if (i >= theta.size())
      throw std::out_of_range("finite_difference_gradient: coordinate " +
                              std::to_string(i) + " out of range");
    const double saved = theta[i];
    theta[i] = saved + epsilon;
    const double plus = loss(theta);
    theta[i] = saved - epsilon;
    const double minus = loss(theta);
    theta[i] = saved;
    grad[i] = (plus - minus) / (2.0 * epsilon);
  }
  return grad;
}

double relative_error(double a, double b, double floor) {
  const double scale = std::max({std::abs(a), std::abs(b), floor});
  return std::abs(a - b) / scale;
}

} // namespace ioglm
