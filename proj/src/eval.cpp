// SPDX-License-Identifier: Apache-2.0
#include "ioglm/eval.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <thread>

#include "ioglm/kernels.hpp"

namespace ioglm {

namespace {

std::string fmt_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void finalize(EvalReport &r) {
  r.perplexity = r.tokens ? std::exp(r.nll / static_cast<double>(r.tokens)) : 0.0;
}

template <typename T>
void check_gate_compatible(const LMParams<T> &model, const IOGParams<T> *gate) {
  if (!gate) return;
  if (gate->config.vocab_size != model.config.vocab_size)
    throw std::invalid_argument("gate vocabulary size " +
                                std::to_string(gate->config.vocab_size) +
                                " != model vocabulary size " +
                                std::to_string(model.config.vocab_size));
  if (gate->config.variant == GateVariant::with_hidden &&
      gate->config.context_dim != model.config.hidden_dim)
    throw std::invalid_argument("with_hidden gate expects hidden width " +
                                std::to_string(gate->config.context_dim));
}

/// Scores targets at positions [first, last) of the stream.
template <typename T>
EvalReport score_range(const LMParams<T> &model, const IOGParams<T> *gate,
                       const TokenStream &stream, std::size_t first, std::size_t last,
                       std::size_t warmup, bool identity) {
  auto state = HiddenState<T>::zeros(model.config);
  GateState<T> gstate;
  if (gate) gstate = GateState<T>::zeros(gate->config);
  const bool use_gate = gate && !identity;

  const std::size_t begin = first - 1 >= warmup ? first - 1 - warmup : 0;
  EvalReport r;
  Vector<T> z(model.config.vocab_size);
  for (std::size_t pos = begin; pos + 1 < last; ++pos) {
    const WordIndex input = stream.tokens[pos];
    auto tr = forward_step<T>(model, state, input);
    std::span<const T> logits = tr.logits.span();
    if (use_gate) {
      const auto gt = compute_gate<T>(*gate, input, tr.h.back().span(), gstate);
      for (std::size_t v = 0; v < z.size(); ++v) z[v] = gt.gate[v] * tr.logits[v];
      logits = z.span();
    }
    if (pos + 1 < first) continue;
    r.nll += cross_entropy_from_logits<T>(logits, stream.tokens[pos + 1]);
    ++r.tokens;
  }
  return r;
}

} // namespace

std::string EvalReport::to_json() const {
  std::string s = "{\"tokens\":" + std::to_string(tokens) + ",\"nll\":" + fmt_double(nll) +
                  ",\"perplexity\":" + fmt_double(perplexity) + ",\"members\":[";
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (i) s += ',';
    s += members[i].to_json();
  }
  return s + "]}";
}

template <typename T>
EvalReport perplexity(const LMParams<T> &model, const IOGParams<T> *gate,
                      const TokenStream &stream, const EvalOptions &options) {
  if (stream.size() < 2)
    throw std::invalid_argument("perplexity: stream needs at least 2 tokens, got " +
                                std::to_string(stream.size()));
  check_gate_compatible(model, gate);
  for (WordIndex w : stream.tokens)
    if (w >= model.config.vocab_size)
      throw std::out_of_range("perplexity: token index out of range for the model");

  const std::size_t predictions = stream.size() - 1;
  const std::size_t segments = std::max<std::size_t>(1, std::min(options.segments, predictions));
  std::vector<EvalReport> parts(segments);
  auto bound = [&](std::size_t k) { return 1 + predictions * k / segments; };
  auto run = [&](std::size_t k) {
    parts[k] = score_range<T>(model, gate, stream, bound(k), bound(k + 1),
                              k == 0 ? 0 : options.warmup, options.force_identity_gate);
  };

  const std::size_t threads = std::max<std::size_t>(1, std::min(options.threads, segments));
  if (threads == 1) {
    for (std::size_t k = 0; k < segments; ++k) run(k);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < threads; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t k = w; k < segments; k += threads) run(k);
      });
  }

  EvalReport total;
  for (const auto &p : parts) {
    total.nll += p.nll;
    total.tokens += p.tokens;
  }
  finalize(total);
  return total;
}

template <typename T>
Vector<T> ensemble_distribution(std::span<const Vector<T>> members) {
  if (members.empty()) throw std::invalid_argument("ensemble_distribution: no members");
  const std::size_t V = members[0].size();
  std::vector<double> acc(V, 0.0);
  for (const auto &m : members) {
    if (m.size() != V)
      throw std::invalid_argument("ensemble_distribution: member lengths " +
                                  std::to_string(V) + " and " + std::to_string(m.size()));
    for (std::size_t i = 0; i < V; ++i) acc[i] += static_cast<double>(m[i]);
  }
  Vector<T> out(V);
  const double inv = 1.0 / static_cast<double>(members.size());
  for (std::size_t i = 0; i < V; ++i) out[i] = static_cast<T>(acc[i] * inv);
  return out;
}

template <typename T>
EvalReport ensemble_perplexity(std::span<const LMParams<T> *const> members,
                               const IOGParams<T> *gate, const TokenStream &stream,
                               const GateObserver<T> &observer, bool force_identity_gate) {
  if (members.empty()) throw std::invalid_argument("ensemble_perplexity: no members");
  if (stream.size() < 2)
    throw std::invalid_argument("ensemble_perplexity: stream needs at least 2 tokens");
  const std::size_t V = members[0]->config.vocab_size;
  for (const auto *m : members) {
    if (m->config.vocab_size != V)
      throw std::invalid_argument("ensemble_perplexity: member vocabulary sizes differ");
    check_gate_compatible(*m, gate);
  }
  if (gate && gate->config.variant == GateVariant::with_hidden && members.size() > 1)
    throw std::invalid_argument(
        "ensemble_perplexity: a with_hidden gate reads one model's hidden state and "
        "cannot be shared across several members");

  const std::size_t M = members.size();
  std::vector<HiddenState<T>> states;
  for (const auto *m : members) states.push_back(HiddenState<T>::zeros(m->config));
  GateState<T> gstate;
  if (gate) gstate = GateState<T>::zeros(gate->config);
  const bool use_gate = gate && !force_identity_gate;
  const Vector<T> ones(V, T(1));

  EvalReport report;
  report.members.resize(M);
  Vector<T> z(V);
  std::vector<double> log_p(M);

  for (std::size_t pos = 0; pos + 1 < stream.size(); ++pos) {
    const WordIndex input = stream.tokens[pos];
    const WordIndex target = stream.tokens[pos + 1];

    std::vector<StepTrace<T>> steps;
    steps.reserve(M);
    for (std::size_t m = 0; m < M; ++m)
      steps.push_back(forward_step<T>(*members[m], states[m], input));

    // The gate advances once per timestep, not once per member.
    GateTrace<T> gt;
    const Vector<T> *g = &ones;
    if (use_gate) {
      gt = compute_gate<T>(*gate, input, steps[0].h.back().span(), gstate);
      g = &gt.gate;
    }

    for (std::size_t m = 0; m < M; ++m) {
      if (observer) observer(pos, m, g->span());
      for (std::size_t v = 0; v < V; ++v) z[v] = (*g)[v] * steps[m].logits[v];
      const double nll = cross_entropy_from_logits<T>(z.span(), target);
      log_p[m] = -nll;
      report.members[m].nll += nll;
      ++report.members[m].tokens;
    }
    // log of the averaged distribution at the target, in log space.
    report.nll -= log_sum_exp<double>(log_p) - std::log(static_cast<double>(M));
    ++report.tokens;
  }

  for (auto &m : report.members) finalize(m);
  finalize(report);
  return report;
}

#define IOGLM_INSTANTIATE_EVAL(T)                                                  \
  template EvalReport perplexity<T>(const LMParams<T> &, const IOGParams<T> *,     \
                                    const TokenStream &, const EvalOptions &);     \
  template Vector<T> ensemble_distribution<T>(std::span<const Vector<T>>);         \
  template EvalReport ensemble_perplexity<T>(std::span<const LMParams<T> *const>,  \
                                             const IOGParams<T> *,                 \
                                             const TokenStream &,                  \
                                             const GateObserver<T> &, bool);

IOGLM_INSTANTIATE_EVAL(float)
IOGLM_INSTANTIATE_EVAL(double)

} // namespace ioglm
