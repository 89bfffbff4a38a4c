// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ioglm/tensor.hpp"

namespace ioglm {

enum class LrSchedule { inverse_sqrt_epoch, constant, step };

std::string to_string(LrSchedule s);
LrSchedule parse_lr_schedule(const std::string &name);

/// initial_lr / sqrt(epoch); epochs count from 1.
double lr_at_epoch(double initial_lr, std::size_t epoch);

/// Learning rate for `epoch` under any schedule. `step` multiplies by
/// `decay` once per epoch after `decay_start`.
double scheduled_lr(LrSchedule schedule, double initial_lr, std::size_t epoch,
                    double decay = 1.0 / 1.2, std::size_t decay_start = 6);

template <typename T>
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;

  /// Zero moments mirroring `params` exactly.
  static AdamState for_tensors(const std::vector<TensorRef<T>> &params);
};

/// One bias-corrected Adam update of every tensor; the shared step counter
/// advances once per call.
template <typename T>
void adam_step(const std::vector<TensorRef<T>> &params,
               const std::vector<TensorRef<const T>> &grads, AdamState<T> &state,
               double lr);

template <typename T>
void sgd_step(const std::vector<TensorRef<T>> &params,
              const std::vector<TensorRef<const T>> &grads, double lr);

template <typename T>
double global_norm(const std::vector<TensorRef<const T>> &grads);

/// Rescales in place so the global norm is at most max_norm; returns the
/// norm before clipping. max_norm <= 0 disables clipping.
template <typename T>
double clip_global_norm(const std::vector<TensorRef<T>> &grads, double max_norm);

/// Adds `src` into `dst` tensor by tensor.
template <typename T>
void accumulate(const std::vector<TensorRef<T>> &dst,
                const std::vector<TensorRef<const T>> &src, T scale = T(1));

/// 64-bit FNV-1a over the raw bytes of every tensor, in order.
template <typename T>
std::uint64_t checksum(const std::vector<TensorRef<const T>> &tensors);

} // namespace ioglm
