// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ioglm/corpus.hpp"
#include "ioglm/gate.hpp"
#include "ioglm/model.hpp"

namespace ioglm {

/// perplexity = exp(nll / tokens). The first token of a stream is only
/// conditioned on, so a stream of T tokens scores T - 1 predictions.
struct EvalReport {
  std::size_t tokens = 0;
  double nll = 0.0;
  double perplexity = 0.0;
  std::vector<EvalReport> members;

  /// {"tokens":..,"nll":..,"perplexity":..,"members":[...]}
  std::string to_json() const;
};

struct EvalOptions {
  /// Number of contiguous segments the stream is split into. Each segment
  /// restarts from a zero state after replaying `warmup` preceding tokens.
  std::size_t segments = 1;
  std::size_t warmup = 200;
  std::size_t threads = 1;
  /// Replace the gate by all-ones (the gated model then equals the base).
  bool force_identity_gate = false;
};

/// Hidden state is carried through the whole stream; no dropout.
template <typename T>
EvalReport perplexity(const LMParams<T> &model, const IOGParams<T> *gate,
                      const TokenStream &stream, const EvalOptions &options = {});

/// Arithmetic mean of member distributions.
template <typename T>
Vector<T> ensemble_distribution(std::span<const Vector<T>> members);

/// Called once per (timestep, member) with the gate vector multiplied into
/// that member's logits.
template <typename T>
using GateObserver =
    std::function<void(std::size_t step, std::size_t member, std::span<const T> gate)>;

/// Each member advances its own hidden state and computes its own logits;
/// one shared gate (advanced once per timestep) multiplies every member's
/// logits before that member's softmax, then the distributions are averaged.
/// The report carries each member's standalone (gated) perplexity.
template <typename T>
EvalReport ensemble_perplexity(std::span<const LMParams<T> *const> members,
                               const IOGParams<T> *gate, const TokenStream &stream,
                               const GateObserver<T> &observer = {},
                               bool force_identity_gate = false);

} // namespace ioglm
