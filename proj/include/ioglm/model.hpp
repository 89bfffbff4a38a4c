// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ioglm/corpus.hpp"
#include "ioglm/random.hpp"
#include "ioglm/tensor.hpp"

namespace ioglm {

enum class CellKind { elman, lstm };

std::string to_string(CellKind kind);
CellKind parse_cell_kind(const std::string &name);

struct LMConfig {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 0;
  std::size_t hidden_dim = 0;
  std::size_t layers = 1;
  CellKind cell = CellKind::lstm;
  bool tie_weights = false;

  /// Throws std::invalid_argument on inconsistent dimensions.
  void validate() const;
  friend bool operator==(const LMConfig &, const LMConfig &) = default;
};

/// One recurrent layer acting on the concatenation [x, h_prev].
/// Elman: weight is D_h x (D_in + D_h). LSTM: weight is 4D_h x (D_in + D_h),
/// row blocks ordered input, forget, candidate, output.
template <typename T>
struct RecurrentLayer {
  Matrix<T> weight;
  Vector<T> bias;
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
};

/// Embedding E (stored V x D_e, one row per word), recurrent stack, and the
/// output layer s = W h + b. With tie_weights the output layer reads the
/// embedding storage directly and `output` stays empty.
template <typename T>
struct LMParams {
  LMConfig config;
  Matrix<T> embedding;
  std::vector<RecurrentLayer<T>> layers;
  Matrix<T> output;
  Vector<T> output_bias;

  const Matrix<T> &output_weights() const {
    return config.tie_weights ? embedding : output;
  }
  Matrix<T> &output_weights() {
    return config.tie_weights ? embedding : output;
  }

  /// Every distinct parameter array, in a fixed order.
  std::vector<TensorRef<T>> tensors();
  std::vector<TensorRef<const T>> tensors() const;
  std::size_t parameter_count() const;

  /// Zero-filled parameters with this configuration's shapes.
  static LMParams zeros(const LMConfig &config);
};

template <typename To, typename From>
LMParams<To> cast_params(const LMParams<From> &p);

template <typename T>
struct HiddenState {
  std::vector<Vector<T>> h;
  std::vector<Vector<T>> c; // LSTM only

  static HiddenState zeros(const LMConfig &config);
  /// Top-layer hidden vector.
  const Vector<T> &top() const { return h.back(); }
};

/// Inverted-dropout masks for one timestep: entries are 0 or 1/keep.
template <typename T>
struct DropoutMasks {
  Vector<T> embedding;
  std::vector<Vector<T>> layers;
};

template <typename T>
DropoutMasks<T> sample_dropout_masks(const LMConfig &config, double rate, Rng &rng);

/// Everything a single timestep needs for its backward pass.
template <typename T>
struct StepTrace {
  WordIndex input = 0;
  Vector<T> embed_mask;                 // empty when no dropout
  std::vector<Vector<T>> concat;        // per layer [x, h_prev]
  std::vector<Vector<T>> activations;   // LSTM i,f,g,o; Elman empty
  std::vector<Vector<T>> c_prev;        // LSTM only
  std::vector<Vector<T>> c;             // LSTM only
  std::vector<Vector<T>> h;             // per layer new hidden (pre-dropout)
  std::vector<Vector<T>> out_mask;      // per layer, empty when no dropout
  Vector<T> top;                        // input to the output layer
  Vector<T> logits;                     // s_t
};

template <typename T>
using ForwardTrace = std::vector<StepTrace<T>>;

/// Uniform [-0.1, 0.1] init from `seed`; LSTM forget-gate bias set to 1.
template <typename T>
LMParams<T> init_params(const LMConfig &config, std::uint64_t seed);

/// Advances `state` by one input word and returns the step's trace; the
/// logits are trace.logits.
template <typename T>
StepTrace<T> forward_step(const LMParams<T> &params, HiddenState<T> &state,
                          WordIndex input,
                          const DropoutMasks<T> *masks = nullptr);

template <typename T>
struct BackwardResult {
  LMParams<T> grads;
  HiddenState<T> state_grad; // d loss / d (state before the block)
};

/// Gradients of the block's mean cross-entropy.
template <typename T>
BackwardResult<T> backward_sequence(const LMParams<T> &params,
                                    const ForwardTrace<T> &trace,
                                    std::span<const WordIndex> targets);

/// Same pass, driven by caller-supplied d loss / d logits per step. Gradients
/// are accumulated into `grads`.
template <typename T>
HiddenState<T> backward_from_logit_grads(const LMParams<T> &params,
                                         const ForwardTrace<T> &trace,
                                         std::span<const Vector<T>> logit_grads,
                                         LMParams<T> &grads);

template <typename T>
Vector<T> predict_distribution(const LMParams<T> &params, HiddenState<T> &state,
                               WordIndex input);

/// Mean cross-entropy of a block run from `state` (which is advanced).
template <typename T>
double sequence_loss(const LMParams<T> &params, HiddenState<T> &state,
                     std::span<const WordIndex> inputs,
                     std::span<const WordIndex> targets);

} // namespace ioglm
