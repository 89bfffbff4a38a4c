// SPDX-License-Identifier: Apache-2.0
#pragma once

// Input-to-output gate: a sigmoid gate over the vocabulary, computed from the
// current input word, that rescales a frozen language model's logits before
// the softmax:
//
//   input_only   g = sigmoid(W_g E_g[w] + b_g)
//   with_hidden  g = sigmoid(W'_g [h_t, E_g[w]] + b_g)
//   lstm_gate    g = sigmoid(W_g h'_t + b_g),  h'_t = LSTM(E_g[w], h'_{t-1})
//
//   P = softmax(g * s)

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ioglm/corpus.hpp"
#include "ioglm/model.hpp"
#include "ioglm/random.hpp"
#include "ioglm/tensor.hpp"

namespace ioglm {

enum class GateVariant { input_only, with_hidden, lstm_gate };

std::string to_string(GateVariant v);
GateVariant parse_gate_variant(const std::string &name);

struct GateConfig {
  std::size_t vocab_size = 0;
  std::size_t gate_dim = 300;    // D_g; also the gate-LSTM width
  std::size_t context_dim = 0;   // D_h of the base model, with_hidden only
  GateVariant variant = GateVariant::input_only;

  void validate() const;
  /// Width of the vector the gate weight matrix multiplies.
  std::size_t feature_dim() const {
    return variant == GateVariant::with_hidden ? context_dim + gate_dim : gate_dim;
  }
  friend bool operator==(const GateConfig &, const GateConfig &) = default;
};

/// E_g (V x D_g, one row per word, distinct from the base embedding),
/// W_g (V x feature_dim), b_g, and for lstm_gate a one-layer LSTM of width
/// D_g. Each variant owns its own bias.
template <typename T>
struct IOGParams {
  GateConfig config;
  Matrix<T> embedding;
  Matrix<T> weight;
  Vector<T> bias;
  RecurrentLayer<T> lstm; // empty unless lstm_gate

  std::vector<TensorRef<T>> tensors();
  std::vector<TensorRef<const T>> tensors() const;
  std::size_t parameter_count() const;

  static IOGParams zeros(const GateConfig &config);
};

template <typename To, typename From>
IOGParams<To> cast_gate(const IOGParams<From> &p);

/// Recurrent state of the lstm_gate variant; empty for the others.
template <typename T>
struct GateState {
  Vector<T> h;
  Vector<T> c;
  static GateState zeros(const GateConfig &config);
};

template <typename T>
struct GateTrace {
  WordIndex input = 0;
  Vector<T> embed_mask;   // dropout on e'_t, empty when off
  Vector<T> feature;      // what W_g multiplies: e', [h, e'] or h'
  Vector<T> lstm_concat;  // lstm_gate: [e', h'_prev]
  Vector<T> lstm_act;     // lstm_gate: i, f, g, o
  Vector<T> lstm_c_prev;
  Vector<T> lstm_c;
  Vector<T> gate;         // g_t, entries in (0, 1)
};

/// W_g, E_g uniform in [-0.01, 0.01]; b_g = 4 so the initial gate is about
/// 0.982 everywhere. The gate LSTM uses the base-model init.
template <typename T>
IOGParams<T> init_gate(const GateConfig &config, std::uint64_t seed);

/// `base_hidden` is the base model's top hidden state h_t; required iff the
/// variant is with_hidden. `state` is advanced for lstm_gate.
template <typename T>
GateTrace<T> compute_gate(const IOGParams<T> &gate, WordIndex input,
                          std::span<const T> base_hidden, GateState<T> &state,
                          const Vector<T> *embed_mask = nullptr);

/// softmax(g * s)
template <typename T>
Vector<T> apply_gate(const Vector<T> &g, const Vector<T> &s);

/// Gradients of the mean gated cross-entropy with respect to the gate
/// parameters only. logits[t] is the frozen model's s_t.
template <typename T>
IOGParams<T> gate_backward(const IOGParams<T> &gate,
                           const std::vector<GateTrace<T>> &trace,
                           std::span<const Vector<T>> logits,
                           std::span<const WordIndex> targets);

/// Mean gated cross-entropy over a block, starting the gate from `state`.
/// `hiddens` may be empty unless the variant is with_hidden.
template <typename T>
double gated_sequence_loss(const IOGParams<T> &gate, GateState<T> state,
                           std::span<const WordIndex> inputs,
                           std::span<const Vector<T>> logits,
                           std::span<const Vector<T>> hiddens,
                           std::span<const WordIndex> targets);

struct WeightedWord {
  std::string word;
  double weight = 0.0;
};

/// The k vocabulary entries with the largest gate weight for `input_word`,
/// restricted to candidates whose frequency is >= min_freq. Ties go to the
/// lower vocabulary index. input_only gates only.
std::vector<WeightedWord> top_weighted_words(const IOGParams<float> &gate,
                                             const std::string &input_word,
                                             const Vocabulary &vocab, std::size_t k,
                                             std::size_t min_freq,
                                             std::span<const std::size_t> freq_table);

/// `word<TAB>w1:g1 w2:g2 ...`, weights with four decimals.
std::string format_analysis_row(const std::string &word,
                                const std::vector<WeightedWord> &top);

} // namespace ioglm
