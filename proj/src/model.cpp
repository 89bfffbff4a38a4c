// SPDX-License-Identifier: Apache-2.0
#include "ioglm/model.hpp"

#include <cmath>
#include <stdexcept>

#include "ioglm/kernels.hpp"

namespace ioglm {

std::string to_string(CellKind kind) {
  return kind == CellKind::lstm ? "lstm" : "elman";
}

CellKind parse_cell_kind(const std::string &name) {
  if (name == "lstm") return CellKind::lstm;
  if (name == "elman") return CellKind::elman;
  throw std::invalid_argument("unknown cell kind '" + name + "'");
}

void LMConfig::validate() const {
  if (vocab_size < 2 || embed_dim == 0 || hidden_dim == 0 || layers == 0)
    throw std::invalid_argument(
        "LM config: vocab size >= 2 and positive dimensions/layers required");
  if (tie_weights && embed_dim != hidden_dim)
    throw std::invalid_argument("LM config: weight tying requires embed_dim (" +
                                std::to_string(embed_dim) + ") == hidden_dim (" +
                                std::to_string(hidden_dim) + ")");
}

namespace {

std::size_t gate_rows(CellKind kind, std::size_t hidden) {
  return kind == CellKind::lstm ? 4 * hidden : hidden;
}

template <typename T, typename Params>
auto collect_tensors(Params &p) {
  using Ref = TensorRef<T>;
  std::vector<Ref> out;
  auto add_m = [&](std::string name, auto &m) {
    out.push_back(Ref{std::move(name), {m.rows(), m.cols()}, {m.data(), m.size()}});
  };
  auto add_v = [&](std::string name, auto &v) {
    out.push_back(Ref{std::move(name), {v.size()}, {v.data(), v.size()}});
  };
  add_m("embedding", p.embedding);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    add_m("layer" + std::to_string(l) + ".weight", p.layers[l].weight);
    add_v("layer" + std::to_string(l) + ".bias", p.layers[l].bias);
  }
  if (!p.config.tie_weights) add_m("output.weight", p.output);
  add_v("output.bias", p.output_bias);
  return out;
}

} // namespace

template <typename T>
std::vector<TensorRef<T>> LMParams<T>::tensors() {
  return collect_tensors<T>(*this);
}

template <typename T>
std::vector<TensorRef<const T>> LMParams<T>::tensors() const {
  return collect_tensors<const T>(*this);
}

template <typename T>
std::size_t LMParams<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto &t : tensors()) n += t.values.size();
  return n;
}

template <typename T>
LMParams<T> LMParams<T>::zeros(const LMConfig &config) {
  config.validate();
  LMParams<T> p;
  p.config = config;
  p.embedding = Matrix<T>(config.vocab_size, config.embed_dim);
  for (std::size_t l = 0; l < config.layers; ++l) {
    RecurrentLayer<T> layer;
    layer.input_dim = l == 0 ? config.embed_dim : config.hidden_dim;
    layer.hidden_dim = config.hidden_dim;
    const std::size_t rows = gate_rows(config.cell, config.hidden_dim);
    layer.weight = Matrix<T>(rows, layer.input_dim + config.hidden_dim);
    layer.bias = Vector<T>(rows);
    p.layers.push_back(std::move(layer));
  }
  if (!config.tie_weights)
    p.output = Matrix<T>(config.vocab_size, config.hidden_dim);
  p.output_bias = Vector<T>(config.vocab_size);
  return p;
}

template <typename To, typename From>
LMParams<To> cast_params(const LMParams<From> &p) {
  LMParams<To> out;
  out.config = p.config;
  out.embedding = cast<To>(p.embedding);
  for (const auto &l : p.layers)
    out.layers.push_back({cast<To>(l.weight), cast<To>(l.bias), l.input_dim, l.hidden_dim});
  out.output = cast<To>(p.output);
  out.output_bias = cast<To>(p.output_bias);
  return out;
}

template <typename T>
HiddenState<T> HiddenState<T>::zeros(const LMConfig &config) {
  HiddenState<T> s;
  s.h.assign(config.layers, Vector<T>(config.hidden_dim));
  if (config.cell == CellKind::lstm)
    s.c.assign(config.layers, Vector<T>(config.hidden_dim));
  return s;
}

namespace {
template <typename T>
Vector<T> bernoulli_mask(std::size_t n, double rate, Rng &rng) {
  Vector<T> m(n);
  const T scale = static_cast<T>(1.0 / (1.0 - rate));
  for (std::size_t i = 0; i < n; ++i) m[i] = rng.uniform() < rate ? T(0) : scale;
  return m;
}
} // namespace

template <typename T>
DropoutMasks<T> sample_dropout_masks(const LMConfig &config, double rate, Rng &rng) {
  if (rate < 0.0 || rate >= 1.0)
    throw std::invalid_argument("dropout rate must lie in [0, 1)");
  DropoutMasks<T> m;
  m.embedding = bernoulli_mask<T>(config.embed_dim, rate, rng);
  for (std::size_t l = 0; l < config.layers; ++l)
    m.layers.push_back(bernoulli_mask<T>(config.hidden_dim, rate, rng));
  return m;
}

template <typename T>
LMParams<T> init_params(const LMConfig &config, std::uint64_t seed) {
  auto p = LMParams<T>::zeros(config);
  Rng rng(seed);
  for (auto &t : p.tensors())
    for (auto &x : t.values) x = static_cast<T>(rng.uniform(-0.1, 0.1));
  if (config.cell == CellKind::lstm) {
    const std::size_t h = config.hidden_dim;
    for (auto &layer : p.layers)
      for (std::size_t i = h; i < 2 * h; ++i) layer.bias[i] = T(1);
  }
  return p;
}

template <typename T>
StepTrace<T> forward_step(const LMParams<T> &params, HiddenState<T> &state,
                          WordIndex input, const DropoutMasks<T> *masks) {
  const auto &cfg = params.config;
  if (input >= cfg.vocab_size)
    throw std::out_of_range("forward_step: input index " + std::to_string(input) +
                            " out of range (V=" + std::to_string(cfg.vocab_size) +
                            ")");
  if (state.h.size() != cfg.layers)
    throw std::invalid_argument("forward_step: hidden state has " +
                                std::to_string(state.h.size()) +
                                " layers, model has " + std::to_string(cfg.layers));
  const std::size_t hd = cfg.hidden_dim;
  const bool lstm = cfg.cell == CellKind::lstm;

  StepTrace<T> tr;
  tr.input = input;
  tr.concat.resize(cfg.layers);
  tr.h.resize(cfg.layers);
  if (lstm) {
    tr.activations.resize(cfg.layers);
    tr.c_prev.resize(cfg.layers);
    tr.c.resize(cfg.layers);
  }

  auto emb = params.embedding.row(input);
  Vector<T> x(emb.size());
  for (std::size_t i = 0; i < emb.size(); ++i) x[i] = emb[i];
  if (masks) {
    tr.embed_mask = masks->embedding;
    for (std::size_t i = 0; i < x.size(); ++i) x[i] *= tr.embed_mask[i];
    tr.out_mask = masks->layers;
  }

  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const auto &layer = params.layers[l];
    if (state.h[l].size() != hd)
      throw std::invalid_argument("forward_step: hidden width mismatch");
    Vector<T> xh(layer.input_dim + hd);
    std::copy(x.begin(), x.end(), xh.begin());
    std::copy(state.h[l].begin(), state.h[l].end(),
              xh.begin() + static_cast<std::ptrdiff_t>(layer.input_dim));

    Vector<T> pre(layer.weight.rows());
    matvec_into<T>(layer.weight, xh.span(), pre.span());
    for (std::size_t i = 0; i < pre.size(); ++i) pre[i] += layer.bias[i];

    Vector<T> h(hd);
    if (lstm) {
      Vector<T> act(4 * hd);
      Vector<T> c(hd);
      const auto &c_prev = state.c[l];
      for (std::size_t j = 0; j < hd; ++j) {
        const T ig = sigmoid(pre[j]);
        const T fg = sigmoid(pre[hd + j]);
        const T cand = std::tanh(pre[2 * hd + j]);
        const T og = sigmoid(pre[3 * hd + j]);
        act[j] = ig;
        act[hd + j] = fg;
        act[2 * hd + j] = cand;
        act[3 * hd + j] = og;
        c[j] = fg * c_prev[j] + ig * cand;
        h[j] = og * std::tanh(c[j]);
      }
      tr.activations[l] = std::move(act);
      tr.c_prev[l] = c_prev;
      tr.c[l] = c;
      state.c[l] = std::move(c);
    } else {
      for (std::size_t j = 0; j < hd; ++j) h[j] = std::tanh(pre[j]);
    }
    tr.concat[l] = std::move(xh);
    tr.h[l] = h;
    state.h[l] = h;

    x = std::move(h);
    if (masks)
      for (std::size_t i = 0; i < x.size(); ++i) x[i] *= tr.out_mask[l][i];
  }

  tr.top = std::move(x);
  const auto &w = params.output_weights();
  tr.logits = Vector<T>(cfg.vocab_size);
  matvec_into<T>(w, tr.top.span(), tr.logits.span());
  for (std::size_t v = 0; v < cfg.vocab_size; ++v) tr.logits[v] += params.output_bias[v];
  return tr;
}

template <typename T>
HiddenState<T> backward_from_logit_grads(const LMParams<T> &params,
                                         const ForwardTrace<T> &trace,
                                         std::span<const Vector<T>> logit_grads,
                                         LMParams<T> &grads) {
  const auto &cfg = params.config;
  if (trace.empty()) throw std::invalid_argument("backward: empty trace");
  if (logit_grads.size() != trace.size())
    throw std::invalid_argument("backward: " + std::to_string(logit_grads.size()) +
                                " logit gradients for a trace of " +
                                std::to_string(trace.size()) + " steps");
  const std::size_t hd = cfg.hidden_dim;
  const bool lstm = cfg.cell == CellKind::lstm;

  auto dstate = HiddenState<T>::zeros(cfg);
  auto &dh_next = dstate.h;
  auto &dc_next = dstate.c;

  auto &dw_out = grads.output_weights();
  const auto &w_out = params.output_weights();

  for (std::size_t t = trace.size(); t-- > 0;) {
    const auto &tr = trace[t];
    const auto &dlogits = logit_grads[t];

    outer_accumulate<T>(dw_out, dlogits.span(), tr.top.span());
    for (std::size_t v = 0; v < cfg.vocab_size; ++v) grads.output_bias[v] += dlogits[v];

    Vector<T> dx(hd);
    matvec_transposed_accumulate<T>(w_out, dlogits.span(), dx.span());

    for (std::size_t l = cfg.layers; l-- > 0;) {
      const auto &layer = params.layers[l];
      auto &glayer = grads.layers[l];

      Vector<T> dh(hd);
      for (std::size_t j = 0; j < hd; ++j) {
        const T up = tr.out_mask.empty() ? dx[j] : dx[j] * tr.out_mask[l][j];
        dh[j] = up + dh_next[l][j];
      }

      Vector<T> dpre(layer.weight.rows());
      if (lstm) {
        const auto &act = tr.activations[l];
        for (std::size_t j = 0; j < hd; ++j) {
          const T ig = act[j], fg = act[hd + j], cand = act[2 * hd + j],
                  og = act[3 * hd + j];
          const T tc = std::tanh(tr.c[l][j]);
          const T dog = dh[j] * tc;
          const T dc = dh[j] * og * (T(1) - tc * tc) + dc_next[l][j];
          dpre[j] = dc * cand * ig * (T(1) - ig);
          dpre[hd + j] = dc * tr.c_prev[l][j] * fg * (T(1) - fg);
          dpre[2 * hd + j] = dc * ig * (T(1) - cand * cand);
          dpre[3 * hd + j] = dog * og * (T(1) - og);
          dc_next[l][j] = dc * fg;
        }
      } else {
        for (std::size_t j = 0; j < hd; ++j) {
          const T h = tr.h[l][j];
          dpre[j] = dh[j] * (T(1) - h * h);
        }
      }

      outer_accumulate<T>(glayer.weight, dpre.span(), tr.concat[l].span());
      for (std::size_t i = 0; i < dpre.size(); ++i) glayer.bias[i] += dpre[i];

      Vector<T> dxh(layer.input_dim + hd);
      matvec_transposed_accumulate<T>(layer.weight, dpre.span(), dxh.span());
      dx = Vector<T>(layer.input_dim);
      std::copy(dxh.begin(), dxh.begin() + static_cast<std::ptrdiff_t>(layer.input_dim),
                dx.begin());
      std::copy(dxh.begin() + static_cast<std::ptrdiff_t>(layer.input_dim), dxh.end(),
                dh_next[l].begin());
    }

    auto demb = grads.embedding.row(tr.input);
    for (std::size_t i = 0; i < demb.size(); ++i)
      demb[i] += tr.embed_mask.empty() ? dx[i] : dx[i] * tr.embed_mask[i];
  }
  return dstate;
}

template <typename T>
BackwardResult<T> backward_sequence(const LMParams<T> &params,
                                    const ForwardTrace<T> &trace,
                                    std::span<const WordIndex> targets) {
  if (trace.empty()) throw std::invalid_argument("backward_sequence: empty trace");
  if (targets.size() != trace.size())
    throw std::invalid_argument("backward_sequence: " + std::to_string(targets.size()) +
                                " targets for " + std::to_string(trace.size()) +
                                " steps");
  const std::size_t V = params.config.vocab_size;
  const double inv_n = 1.0 / static_cast<double>(trace.size());
  std::vector<Vector<T>> dlogits;
  dlogits.reserve(trace.size());
  for (std::size_t t = 0; t < trace.size(); ++t) {
    if (targets[t] >= V) throw std::out_of_range("backward_sequence: target out of range");
    Vector<T> p(V);
    softmax_into<T>(trace[t].logits.span(), p.span());
    p[targets[t]] -= T(1);
    for (auto &x : p) x = static_cast<T>(x * inv_n);
    dlogits.push_back(std::move(p));
  }
  BackwardResult<T> r{LMParams<T>::zeros(params.config), {}};
  r.state_grad = backward_from_logit_grads<T>(params, trace, dlogits, r.grads);
  return r;
}

template <typename T>
Vector<T> predict_distribution(const LMParams<T> &params, HiddenState<T> &state,
                               WordIndex input) {
  auto tr = forward_step(params, state, input);
  return softmax_stable(tr.logits);
}

template <typename T>
double sequence_loss(const LMParams<T> &params, HiddenState<T> &state,
                     std::span<const WordIndex> inputs,
                     std::span<const WordIndex> targets) {
  if (inputs.empty() || inputs.size() != targets.size())
    throw std::invalid_argument("sequence_loss: inputs/targets length mismatch");
  double total = 0.0;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    auto tr = forward_step(params, state, inputs[t]);
    total += cross_entropy_from_logits<T>(tr.logits.span(), targets[t]);
  }
  return total / static_cast<double>(inputs.size());
}

#define IOGLM_INSTANTIATE_MODEL(T)                                             \
  template struct LMParams<T>;                                                 \
  template struct HiddenState<T>;                                              \
  template DropoutMasks<T> sample_dropout_masks<T>(const LMConfig &, double,   \
                                                   Rng &);                     \
  template LMParams<T> init_params<T>(const LMConfig &, std::uint64_t);        \
  template StepTrace<T> forward_step<T>(const LMParams<T> &, HiddenState<T> &, \
                                        WordIndex, const DropoutMasks<T> *);   \
  template BackwardResult<T> backward_sequence<T>(                             \
      const LMParams<T> &, const ForwardTrace<T> &, std::span<const WordIndex>); \
  template HiddenState<T> backward_from_logit_grads<T>(                        \
      const LMParams<T> &, const ForwardTrace<T> &, std::span<const Vector<T>>, \
      LMParams<T> &);                                                          \
  template Vector<T> predict_distribution<T>(const LMParams<T> &,              \
                                             HiddenState<T> &, WordIndex);     \
  template double sequence_loss<T>(const LMParams<T> &, HiddenState<T> &,      \
                                   std::span<const WordIndex>,                 \
                                   std::span<const WordIndex>);

IOGLM_INSTANTIATE_MODEL(float)
IOGLM_INSTANTIATE_MODEL(double)

template LMParams<double> cast_params<double, float>(const LMParams<float> &);
template LMParams<float> cast_params<float, double>(const LMParams<double> &);

} // namespace ioglm
