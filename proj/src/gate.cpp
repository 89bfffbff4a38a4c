// SPDX-License-Identifier: Apache-2.0
#include "ioglm/gate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "ioglm/kernels.hpp"

namespace ioglm {

std::string to_string(GateVariant v) {
  switch (v) {
  case GateVariant::input_only: return "input_only";
  case GateVariant::with_hidden: return "with_hidden";
  case GateVariant::lstm_gate: return "lstm_gate";
  }
  return "?";
}

GateVariant parse_gate_variant(const std::string &name) {
  if (name == "input_only") return GateVariant::input_only;
  if (name == "with_hidden") return GateVariant::with_hidden;
  if (name == "lstm_gate") return GateVariant::lstm_gate;
  throw std::invalid_argument("unknown gate variant '" + name +
                              "' (expected input_only, with_hidden or lstm_gate)");
}

void GateConfig::validate() const {
  if (vocab_size < 2 || gate_dim == 0)
    throw std::invalid_argument("gate config: vocab size >= 2 and gate_dim > 0 required");
  if (variant == GateVariant::with_hidden && context_dim == 0)
    throw std::invalid_argument("gate config: with_hidden needs the base hidden width");
}

namespace {

template <typename T, typename Params>
auto collect_gate_tensors(Params &p) {
  using Ref = TensorRef<T>;
  std::vector<Ref> out;
  auto add_m = [&](std::string name, auto &m) {
    out.push_back(Ref{std::move(name), {m.rows(), m.cols()}, {m.data(), m.size()}});
  };
  auto add_v = [&](std::string name, auto &v) {
    out.push_back(Ref{std::move(name), {v.size()}, {v.data(), v.size()}});
  };
  add_m("gate.embedding", p.embedding);
  add_m("gate.weight", p.weight);
  add_v("gate.bias", p.bias);
  if (p.config.variant == GateVariant::lstm_gate) {
    add_m("gate.lstm.weight", p.lstm.weight);
    add_v("gate.lstm.bias", p.lstm.bias);
  }
  return out;
}

} // namespace

template <typename T>
std::vector<TensorRef<T>> IOGParams<T>::tensors() {
  return collect_gate_tensors<T>(*this);
}

template <typename T>
std::vector<TensorRef<const T>> IOGParams<T>::tensors() const {
  return collect_gate_tensors<const T>(*this);
}

template <typename T>
std::size_t IOGParams<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto &t : tensors()) n += t.values.size();
  return n;
}

template <typename T>
IOGParams<T> IOGParams<T>::zeros(const GateConfig &config) {
  config.validate();
  IOGParams<T> p;
  p.config = config;
  p.embedding = Matrix<T>(config.vocab_size, config.gate_dim);
  p.weight = Matrix<T>(config.vocab_size, config.feature_dim());
  p.bias = Vector<T>(config.vocab_size);
  if (config.variant == GateVariant::lstm_gate) {
    p.lstm.input_dim = config.gate_dim;
    p.lstm.hidden_dim = config.gate_dim;
    p.lstm.weight = Matrix<T>(4 * config.gate_dim, 2 * config.gate_dim);
    p.lstm.bias = Vector<T>(4 * config.gate_dim);
  }
  return p;
}

template <typename To, typename From>
IOGParams<To> cast_gate(const IOGParams<From> &p) {
  IOGParams<To> out;
  out.config = p.config;
  out.embedding = cast<To>(p.embedding);
  out.weight = cast<To>(p.weight);
  out.bias = cast<To>(p.bias);
  out.lstm = {cast<To>(p.lstm.weight), cast<To>(p.lstm.bias), p.lstm.input_dim,
              p.lstm.hidden_dim};
  return out;
}

template <typename T>
GateState<T> GateState<T>::zeros(const GateConfig &config) {
  GateState<T> s;
  if (config.variant == GateVariant::lstm_gate) {
    s.h = Vector<T>(config.gate_dim);
    s.c = Vector<T>(config.gate_dim);
  }
  return s;
}

template <typename T>
IOGParams<T> init_gate(const GateConfig &config, std::uint64_t seed) {
  auto p = IOGParams<T>::zeros(config);
  Rng rng(seed);
  for (auto &x : p.embedding.span()) x = static_cast<T>(rng.uniform(-0.01, 0.01));
  for (auto &x : p.weight.span()) x = static_cast<T>(rng.uniform(-0.01, 0.01));
  p.bias.fill(T(4));
  if (config.variant == GateVariant::lstm_gate) {
    for (auto &x : p.lstm.weight.span()) x = static_cast<T>(rng.uniform(-0.1, 0.1));
    for (auto &x : p.lstm.bias.span()) x = static_cast<T>(rng.uniform(-0.1, 0.1));
    for (std::size_t i = config.gate_dim; i < 2 * config.gate_dim; ++i)
      p.lstm.bias[i] = T(1);
  }
  return p;
}

template <typename T>
GateTrace<T> compute_gate(const IOGParams<T> &gate, WordIndex input,
                          std::span<const T> base_hidden, GateState<T> &state,
                          const Vector<T> *embed_mask) {
  const auto &cfg = gate.config;
  if (input >= cfg.vocab_size)
    throw std::out_of_range("compute_gate: input index " + std::to_string(input) +
                            " out of range (V=" + std::to_string(cfg.vocab_size) + ")");
  const std::size_t dg = cfg.gate_dim;

  GateTrace<T> tr;
  tr.input = input;
  Vector<T> e(dg);
  auto row = gate.embedding.row(input);
  std::copy(row.begin(), row.end(), e.begin());
  if (embed_mask) {
    tr.embed_mask = *embed_mask;
    for (std::size_t i = 0; i < dg; ++i) e[i] *= tr.embed_mask[i];
  }

  switch (cfg.variant) {
  case GateVariant::input_only:
    tr.feature = std::move(e);
    break;
  case GateVariant::with_hidden: {
    if (base_hidden.size() != cfg.context_dim)
      throw std::invalid_argument(
          "compute_gate: with_hidden requires the base hidden state (width " +
          std::to_string(cfg.context_dim) + "), got width " +
          std::to_string(base_hidden.size()));
    tr.feature = Vector<T>(cfg.context_dim + dg);
    std::copy(base_hidden.begin(), base_hidden.end(), tr.feature.begin());
    std::copy(e.begin(), e.end(),
              tr.feature.begin() + static_cast<std::ptrdiff_t>(cfg.context_dim));
    break;
  }
  case GateVariant::lstm_gate: {
    if (state.h.size() != dg)
      throw std::invalid_argument("compute_gate: lstm_gate state not initialised");
    tr.lstm_concat = Vector<T>(2 * dg);
    std::copy(e.begin(), e.end(), tr.lstm_concat.begin());
    std::copy(state.h.begin(), state.h.end(),
              tr.lstm_concat.begin() + static_cast<std::ptrdiff_t>(dg));
    Vector<T> pre(4 * dg);
    matvec_into<T>(gate.lstm.weight, tr.lstm_concat.span(), pre.span());
    tr.lstm_act = Vector<T>(4 * dg);
    tr.lstm_c_prev = state.c;
    Vector<T> c(dg), h(dg);
    for (std::size_t j = 0; j < dg; ++j) {
      const T ig = sigmoid(pre[j] + gate.lstm.bias[j]);
      const T fg = sigmoid(pre[dg + j] + gate.lstm.bias[dg + j]);
      const T cand = std::tanh(pre[2 * dg + j] + gate.lstm.bias[2 * dg + j]);
      const T og = sigmoid(pre[3 * dg + j] + gate.lstm.bias[3 * dg + j]);
      tr.lstm_act[j] = ig;
      tr.lstm_act[dg + j] = fg;
      tr.lstm_act[2 * dg + j] = cand;
      tr.lstm_act[3 * dg + j] = og;
      c[j] = fg * state.c[j] + ig * cand;
      h[j] = og * std::tanh(c[j]);
    }
    tr.lstm_c = c;
    state.c = std::move(c);
    state.h = h;
    tr.feature = std::move(h);
    break;
  }
  }

  tr.gate = Vector<T>(cfg.vocab_size);
  matvec_into<T>(gate.weight, tr.feature.span(), tr.gate.span());
  for (std::size_t v = 0; v < cfg.vocab_size; ++v)
    tr.gate[v] = sigmoid(tr.gate[v] + gate.bias[v]);
  return tr;
}

template <typename T>
Vector<T> apply_gate(const Vector<T> &g, const Vector<T> &s) {
  if (g.size() != s.size())
    throw std::invalid_argument("apply_gate: gate length " + std::to_string(g.size()) +
                                " != logits length " + std::to_string(s.size()));
  Vector<T> z(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) z[i] = g[i] * s[i];
  return softmax_stable(z);
}

template <typename T>
IOGParams<T> gate_backward(const IOGParams<T> &gate,
                           const std::vector<GateTrace<T>> &trace,
                           std::span<const Vector<T>> logits,
                           std::span<const WordIndex> targets) {
  if (trace.empty()) throw std::invalid_argument("gate_backward: empty trace");
  if (logits.size() != trace.size() || targets.size() != trace.size())
    throw std::invalid_argument("gate_backward: trace of " + std::to_string(trace.size()) +
                                " steps, " + std::to_string(logits.size()) +
                                " logit vectors, " + std::to_string(targets.size()) +
                                " targets");
  const auto &cfg = gate.config;
  const std::size_t V = cfg.vocab_size;
  const std::size_t dg = cfg.gate_dim;
  const bool lstm = cfg.variant == GateVariant::lstm_gate;
  const double inv_n = 1.0 / static_cast<double>(trace.size());

  auto grads = IOGParams<T>::zeros(cfg);
  Vector<T> dh_next(lstm ? dg : 0), dc_next(lstm ? dg : 0);
  Vector<T> z(V), da(V), dfeat(cfg.feature_dim());

  for (std::size_t t = trace.size(); t-- > 0;) {
    const auto &tr = trace[t];
    const auto &s = logits[t];
    if (s.size() != V) throw std::invalid_argument("gate_backward: logits width mismatch");
    if (targets[t] >= V) throw std::out_of_range("gate_backward: target out of range");

    for (std::size_t v = 0; v < V; ++v) z[v] = tr.gate[v] * s[v];
    softmax_into<T>(z.span(), z.span());
    z[targets[t]] -= T(1);
    for (std::size_t v = 0; v < V; ++v) {
      const T dz = static_cast<T>(z[v] * inv_n);
      const T g = tr.gate[v];
      da[v] = dz * s[v] * g * (T(1) - g);
      grads.bias[v] += da[v];
    }
    outer_accumulate<T>(grads.weight, da.span(), tr.feature.span());
    dfeat.fill(T(0));
    matvec_transposed_accumulate<T>(gate.weight, da.span(), dfeat.span());

    Vector<T> de(dg);
    switch (cfg.variant) {
    case GateVariant::input_only:
      de = dfeat;
      break;
    case GateVariant::with_hidden:
      std::copy(dfeat.begin() + static_cast<std::ptrdiff_t>(cfg.context_dim), dfeat.end(),
                de.begin());
      break;
    case GateVariant::lstm_gate: {
      Vector<T> dpre(4 * dg);
      for (std::size_t j = 0; j < dg; ++j) {
        const T ig = tr.lstm_act[j], fg = tr.lstm_act[dg + j],
                cand = tr.lstm_act[2 * dg + j], og = tr.lstm_act[3 * dg + j];
        const T dh = dfeat[j] + dh_next[j];
        const T tc = std::tanh(tr.lstm_c[j]);
        const T dc = dh * og * (T(1) - tc * tc) + dc_next[j];
        dpre[j] = dc * cand * ig * (T(1) - ig);
        dpre[dg + j] = dc * tr.lstm_c_prev[j] * fg * (T(1) - fg);
        dpre[2 * dg + j] = dc * ig * (T(1) - cand * cand);
        dpre[3 * dg + j] = dh * tc * og * (T(1) - og);
        dc_next[j] = dc * fg;
      }
      outer_accumulate<T>(grads.lstm.weight, dpre.span(), tr.lstm_concat.span());
      for (std::size_t i = 0; i < dpre.size(); ++i) grads.lstm.bias[i] += dpre[i];
      Vector<T> dconcat(2 * dg);
      matvec_transposed_accumulate<T>(gate.lstm.weight, dpre.span(), dconcat.span());
      std::copy(dconcat.begin(), dconcat.begin() + static_cast<std::ptrdiff_t>(dg),
                de.begin());
      std::copy(dconcat.begin() + static_cast<std::ptrdiff_t>(dg), dconcat.end(),
                dh_next.begin());
      break;
    }
    }

    auto demb = grads.embedding.row(tr.input);
    for (std::size_t i = 0; i < dg; ++i)
      demb[i] += tr.embed_mask.empty() ? de[i] : de[i] * tr.embed_mask[i];
  }
  return grads;
}

template <typename T>
double gated_sequence_loss(const IOGParams<T> &gate, GateState<T> state,
                           std::span<const WordIndex> inputs,
                           std::span<const Vector<T>> logits,
                           std::span<const Vector<T>> hiddens,
                           std::span<const WordIndex> targets) {
  if (inputs.empty() || inputs.size() != targets.size() || logits.size() != inputs.size())
    throw std::invalid_argument("gated_sequence_loss: length mismatch");
  const bool need_hidden = gate.config.variant == GateVariant::with_hidden;
  if (need_hidden && hiddens.size() != inputs.size())
    throw std::invalid_argument("gated_sequence_loss: with_hidden needs one hidden per step");
  double total = 0.0;
  Vector<T> z(gate.config.vocab_size);
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    std::span<const T> h;
    if (need_hidden) h = hiddens[t].span();
    auto tr = compute_gate<T>(gate, inputs[t], h, state);
    for (std::size_t v = 0; v < z.size(); ++v) z[v] = tr.gate[v] * logits[t][v];
    total += cross_entropy_from_logits<T>(z.span(), targets[t]);
  }
  return total / static_cast<double>(inputs.size());
}

std::vector<WeightedWord> top_weighted_words(const IOGParams<float> &gate,
                                             const std::string &input_word,
                                             const Vocabulary &vocab, std::size_t k,
                                             std::size_t min_freq,
                                             std::span<const std::size_t> freq_table) {
  if (gate.config.variant != GateVariant::input_only)
    throw std::invalid_argument("top_weighted_words: defined for the input_only gate, "
                                "checkpoint has " + to_string(gate.config.variant));
  if (!vocab.contains(input_word))
    throw std::out_of_range("top_weighted_words: '" + input_word + "' not in vocabulary");
  if (vocab.size() != gate.config.vocab_size)
    throw std::invalid_argument("top_weighted_words: vocabulary size mismatch");
  if (min_freq > 0 && freq_table.size() != vocab.size())
    throw std::invalid_argument("top_weighted_words: frequency table size mismatch");

  auto state = GateState<float>::zeros(gate.config);
  const auto tr = compute_gate<float>(gate, vocab.index_of(input_word), {}, state);

  std::vector<WordIndex> candidates;
  for (WordIndex v = 0; v < vocab.size(); ++v)
    if (min_freq == 0 || freq_table[v] >= min_freq) candidates.push_back(v);
  std::stable_sort(candidates.begin(), candidates.end(), [&](WordIndex a, WordIndex b) {
    return tr.gate[a] > tr.gate[b];
  });
  if (candidates.size() > k) candidates.resize(k);

  std::vector<WeightedWord> out;
  for (WordIndex v : candidates) out.push_back({vocab.word(v), tr.gate[v]});
  return out;
}

std::string format_analysis_row(const std::string &word,
                                const std::vector<WeightedWord> &top) {
  std::string row = word + '\t';
  char buf[32];
  for (std::size_t i = 0; i < top.size(); ++i) {
    if (i) row += ' ';
    std::snprintf(buf, sizeof buf, "%.4f", top[i].weight);
    row += top[i].word + ':' + buf;
  }
  return row;
}

#define IOGLM_INSTANTIATE_GATE(T)                                               \
  template struct IOGParams<T>;                                                 \
  template struct GateState<T>;                                                 \
  template IOGParams<T> init_gate<T>(const GateConfig &, std::uint64_t);        \
  template GateTrace<T> compute_gate<T>(const IOGParams<T> &, WordIndex,        \
                                        std::span<const T>, GateState<T> &,     \
                                        const Vector<T> *);                     \
  template Vector<T> apply_gate<T>(const Vector<T> &, const Vector<T> &);       \
  template IOGParams<T> gate_backward<T>(const IOGParams<T> &,                  \
                                         const std::vector<GateTrace<T>> &,     \
                                         std::span<const Vector<T>>,            \
                                         std::span<const WordIndex>);           \
  template double gated_sequence_loss<T>(                                       \
      const IOGParams<T> &, GateState<T>, std::span<const WordIndex>,           \
      std::span<const Vector<T>>, std::span<const Vector<T>>,                   \
      std::span<const WordIndex>);

IOGLM_INSTANTIATE_GATE(float)
IOGLM_INSTANTIATE_GATE(double)

template IOGParams<double> cast_gate<double, float>(const IOGParams<float> &);
template IOGParams<float> cast_gate<float, double>(const IOGParams<double> &);

} // namespace ioglm
