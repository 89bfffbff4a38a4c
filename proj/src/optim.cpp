// SPDX-License-Identifier: Apache-2.0
#include "ioglm/optim.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace ioglm {

std::string to_string(LrSchedule s) {
  switch (s) {
  case LrSchedule::inverse_sqrt_epoch: return "inverse_sqrt_epoch";
  case LrSchedule::constant: return "constant";
  case LrSchedule::step: return "step";
  }
  return "?";
}

LrSchedule parse_lr_schedule(const std::string &name) {
  if (name == "inverse_sqrt_epoch") return LrSchedule::inverse_sqrt_epoch;
  if (name == "constant") return LrSchedule::constant;
  if (name == "step") return LrSchedule::step;
  throw std::invalid_argument("unknown lr schedule '" + name + "'");
}

double lr_at_epoch(double initial_lr, std::size_t epoch) {
  if (epoch == 0) throw std::invalid_argument("lr_at_epoch: epochs start at 1");
  return initial_lr / std::sqrt(static_cast<double>(epoch));
}

double scheduled_lr(LrSchedule schedule, double initial_lr, std::size_t epoch,
                    double decay, std::size_t decay_start) {
  if (epoch == 0) throw std::invalid_argument("scheduled_lr: epochs start at 1");
  switch (schedule) {
  case LrSchedule::inverse_sqrt_epoch: return lr_at_epoch(initial_lr, epoch);
  case LrSchedule::constant: return initial_lr;
  case LrSchedule::step: {
    const double k = epoch > decay_start ? static_cast<double>(epoch - decay_start) : 0.0;
    return initial_lr * std::pow(decay, k);
  }
  }
  return initial_lr;
}

namespace {
template <typename A, typename B>
void check_shapes(const std::vector<TensorRef<A>> &a, const std::vector<TensorRef<B>> &b,
                  const char *what) {
  if (a.size() != b.size())
    throw std::invalid_argument(std::string(what) + ": " + std::to_string(a.size()) +
                                " tensors vs " + std::to_string(b.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].values.size() != b[i].values.size())
      throw std::invalid_argument(std::string(what) + ": tensor '" + a[i].name +
                                  "' has " + std::to_string(a[i].values.size()) +
                                  " entries, counterpart has " +
                                  std::to_string(b[i].values.size()));
}
} // namespace

template <typename T>
AdamState<T> AdamState<T>::for_tensors(const std::vector<TensorRef<T>> &params) {
  AdamState<T> s;
  for (const auto &p : params) {
    s.m.emplace_back(p.values.size(), T(0));
    s.v.emplace_back(p.values.size(), T(0));
  }
  return s;
}

template <typename T>
void adam_step(const std::vector<TensorRef<T>> &params,
               const std::vector<TensorRef<const T>> &grads, AdamState<T> &state,
               double lr) {
  check_shapes(params, grads, "adam_step");
  if (state.m.size() != params.size())
    throw std::invalid_argument("adam_step: optimizer state does not match parameters");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  const T b1 = static_cast<T>(state.beta1), b2 = static_cast<T>(state.beta2);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto &m = state.m[k];
    auto &v = state.v[k];
    if (m.size() != params[k].values.size())
      throw std::invalid_argument("adam_step: moment shape mismatch for '" +
                                  params[k].name + "'");
    auto p = params[k].values;
    auto g = grads[k].values;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (T(1) - b1) * g[i];
      v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
      const double mhat = static_cast<double>(m[i]) / c1;
      const double vhat = static_cast<double>(v[i]) / c2;
      p[i] = static_cast<T>(static_cast<double>(p[i]) -
                            lr * mhat / (std::sqrt(vhat) + state.eps));
    }
  }
}

template <typename T>
void sgd_step(const std::vector<TensorRef<T>> &params,
              const std::vector<TensorRef<const T>> &grads, double lr) {
  check_shapes(params, grads, "sgd_step");
  const T step = static_cast<T>(lr);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k].values;
    auto g = grads[k].values;
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= step * g[i];
  }
}

template <typename T>
double global_norm(const std::vector<TensorRef<const T>> &grads) {
  double sq = 0.0;
  for (const auto &g : grads)
    for (T x : g.values) sq += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(sq);
}

template <typename T>
double clip_global_norm(const std::vector<TensorRef<T>> &grads, double max_norm) {
  std::vector<TensorRef<const T>> view;
  for (const auto &g : grads) view.push_back({g.name, g.shape, g.values});
  const double norm = global_norm(view);
  if (max_norm > 0.0 && norm > max_norm) {
    const T scale = static_cast<T>(max_norm / norm);
    for (const auto &g : grads)
      for (auto &x : g.values) x *= scale;
  }
  return norm;
}

template <typename T>
void accumulate(const std::vector<TensorRef<T>> &dst,
                const std::vector<TensorRef<const T>> &src, T scale) {
  check_shapes(dst, src, "accumulate");
  for (std::size_t k = 0; k < dst.size(); ++k) {
    auto d = dst[k].values;
    auto s = src[k].values;
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += scale * s[i];
  }
}

template <typename T>
std::uint64_t checksum(const std::vector<TensorRef<const T>> &tensors) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto &t : tensors) {
    const auto *bytes = reinterpret_cast<const unsigned char *>(t.values.data());
    for (std::size_t i = 0; i < t.values.size_bytes(); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

#define IOGLM_INSTANTIATE_OPTIM(T)                                              \
  template struct AdamState<T>;                                                 \
  template void adam_step<T>(const std::vector<TensorRef<T>> &,                 \
                             const std::vector<TensorRef<const T>> &,           \
                             AdamState<T> &, double);                           \
  template void sgd_step<T>(const std::vector<TensorRef<T>> &,                  \
                            const std::vector<TensorRef<const T>> &, double);   \
  template double global_norm<T>(const std::vector<TensorRef<const T>> &);      \
  template double clip_global_norm<T>(const std::vector<TensorRef<T>> &, double); \
  template void accumulate<T>(const std::vector<TensorRef<T>> &,                \
                              const std::vector<TensorRef<const T>> &, T);      \
  template std::uint64_t checksum<T>(const std::vector<TensorRef<const T>> &);

IOGLM_INSTANTIATE_OPTIM(float)
IOGLM_INSTANTIATE_OPTIM(double)

} // namespace ioglm
