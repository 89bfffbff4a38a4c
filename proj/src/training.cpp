// SPDX-License-Identifier: Apache-2.0
#include "ioglm/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <thread>

#include "ioglm/eval.hpp"
#include "ioglm/kernels.hpp"
#include "ioglm/random.hpp"

namespace ioglm {

std::string to_string(Phase p) { return p == Phase::base ? "base" : "iog"; }
std::string to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

Phase parse_phase(const std::string &name) {
  if (name == "base") return Phase::base;
  if (name == "iog") return Phase::iog;
  throw std::invalid_argument("unknown phase '" + name + "'");
}

OptimizerKind parse_optimizer(const std::string &name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adam") return OptimizerKind::adam;
  throw std::invalid_argument("unknown optimizer '" + name + "'");
}

TrainConfig TrainConfig::base_defaults() { return TrainConfig{}; }

TrainConfig TrainConfig::iog_defaults() {
  TrainConfig c;
  c.phase = Phase::iog;
  c.max_epochs = 5;
  c.optimizer = OptimizerKind::adam;
  c.initial_lr = 0.001;
  c.lr_schedule = LrSchedule::inverse_sqrt_epoch;
  c.dropout_rate = 0.5;
  c.grad_clip_norm = 0.0;
  c.gate_dim = 300;
  return c;
}

void TrainConfig::validate() const {
  if (batch_size == 0 || bptt_length == 0 || max_epochs == 0 || gate_dim == 0)
    throw std::invalid_argument("train config: batch_size, bptt_length, max_epochs and "
                                "gate_dim must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw std::invalid_argument("train config: dropout_rate must lie in [0, 1)");
  if (!(initial_lr >= 0.0)) throw std::invalid_argument("train config: initial_lr < 0");
  if (!(lr_decay > 0.0)) throw std::invalid_argument("train config: lr_decay must be > 0");
  if (threads == 0) throw std::invalid_argument("train config: threads must be >= 1");
}

double TrainConfig::lr_for_epoch(std::size_t epoch) const {
  return scheduled_lr(lr_schedule, initial_lr, epoch, lr_decay, decay_start);
}

namespace {
std::string num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}
} // namespace

std::vector<std::pair<std::string, std::string>> TrainConfig::echo() const {
  return {
      {"phase", to_string(phase)},
      {"batch_size", std::to_string(batch_size)},
      {"bptt_length", std::to_string(bptt_length)},
      {"max_epochs", std::to_string(max_epochs)},
      {"optimizer", to_string(optimizer)},
      {"initial_lr", num(initial_lr)},
      {"lr_schedule", to_string(lr_schedule)},
      {"lr_decay", num(lr_decay)},
      {"decay_start", std::to_string(decay_start)},
      {"dropout_rate", num(dropout_rate)},
      {"grad_clip_norm", num(grad_clip_norm)},
      {"seed", std::to_string(seed)},
      {"gate_dim", std::to_string(gate_dim)},
      {"gate_variant", to_string(gate_variant)},
  };
}

std::string EpochMetrics::to_json() const {
  return "{\"epoch\":" + std::to_string(epoch) + ",\"lr\":" + num(lr) +
         ",\"train_ppl\":" + num(train_ppl) + ",\"valid_ppl\":" + num(valid_ppl) +
         ",\"wall_seconds\":" + (wall_seconds ? num(*wall_seconds) : std::string("null")) +
         "}";
}

GateConfig gate_config_for(const LMParams<float> &base, const TrainConfig &config) {
  GateConfig g;
  g.vocab_size = base.config.vocab_size;
  g.gate_dim = config.gate_dim;
  g.variant = config.gate_variant;
  if (g.variant == GateVariant::with_hidden) g.context_dim = base.config.hidden_dim;
  return g;
}

namespace {

using Clock = std::chrono::steady_clock;

/// Runs work(lane) for every lane on up to `threads` workers. Each lane owns
/// its outputs, so results do not depend on scheduling.
template <typename F>
void for_each_lane(std::size_t lanes, std::size_t threads, F &&work) {
  threads = std::max<std::size_t>(1, std::min(threads, lanes));
  if (threads == 1) {
    for (std::size_t b = 0; b < lanes; ++b) work(b);
    return;
  }
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t b = w; b < lanes; b += threads) work(b);
    });
}

template <typename P>
std::vector<TensorRef<const float>> const_view(const P &p) {
  return p.tensors();
}

void step_optimizer(const TrainConfig &config, const std::vector<TensorRef<float>> &params,
                    const std::vector<TensorRef<const float>> &grads,
                    AdamState<float> &adam, double lr) {
  if (config.optimizer == OptimizerKind::adam)
    adam_step(params, grads, adam, lr);
  else
    sgd_step(params, grads, lr);
}

void check_finite(double loss, std::size_t epoch, std::size_t block) {
  if (!std::isfinite(loss))
    throw TrainingDiverged("training diverged: non-finite loss at epoch " +
                           std::to_string(epoch) + ", block " + std::to_string(block));
}

} // namespace

BaseTrainResult train_base(const TrainConfig &config, const TokenStream &train,
                           const TokenStream &valid, LMParams<float> params,
                           const EpochCallback &on_epoch) {
  config.validate();
  if (config.phase != Phase::base)
    throw std::invalid_argument("train_base: config phase must be 'base'");
  const auto batches = batchify(train, config.batch_size, config.bptt_length);
  if (batches.block_count() == 0)
    throw std::invalid_argument("train_base: training stream too short for one block");

  const std::size_t B = config.batch_size;
  const auto &cfg = params.config;
  auto adam = AdamState<float>::for_tensors(params.tensors());

  BaseTrainResult result;
  double best_valid = INFINITY;
  std::vector<LMParams<float>> lane_grads(B, LMParams<float>::zeros(cfg));
  std::vector<double> lane_nll(B);

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto t0 = Clock::now();
    const double lr = config.lr_for_epoch(epoch);
    std::vector<HiddenState<float>> states(B, HiddenState<float>::zeros(cfg));
    double epoch_nll = 0.0;
    std::size_t epoch_tokens = 0;

    for (std::size_t k = 0; k < batches.block_count(); ++k) {
      const Batch batch = batches.block(k);
      for_each_lane(B, config.threads, [&](std::size_t b) {
        Rng rng = Rng::derive(config.seed, {epoch, k, b});
        ForwardTrace<float> trace;
        double nll = 0.0;
        for (std::size_t t = 0; t < batch.inputs[b].size(); ++t) {
          std::optional<DropoutMasks<float>> masks;
          if (config.dropout_rate > 0.0)
            masks = sample_dropout_masks<float>(cfg, config.dropout_rate, rng);
          trace.push_back(forward_step<float>(params, states[b], batch.inputs[b][t],
                                              masks ? &*masks : nullptr));
          nll += cross_entropy_from_logits<float>(trace.back().logits.span(),
                                                  batch.targets[b][t]);
        }
        lane_nll[b] = nll;
        lane_grads[b] = backward_sequence<float>(params, trace, batch.targets[b]).grads;
      });

      auto grads = LMParams<float>::zeros(cfg);
      const float inv_b = 1.0f / static_cast<float>(B);
      for (std::size_t b = 0; b < B; ++b) {
        accumulate(grads.tensors(), const_view(lane_grads[b]), inv_b);
        epoch_nll += lane_nll[b];
        epoch_tokens += batch.inputs[b].size();
      }
      check_finite(epoch_nll, epoch, k);
      clip_global_norm(grads.tensors(), config.grad_clip_norm);
      step_optimizer(config, params.tensors(), const_view(grads), adam, lr);
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.lr = lr;
    m.train_ppl = std::exp(epoch_nll / static_cast<double>(epoch_tokens));
    EvalOptions eo;
    eo.threads = config.threads;
    m.valid_ppl = perplexity<float>(params, nullptr, valid, eo).perplexity;
    check_finite(m.valid_ppl, epoch, batches.block_count());
    if (config.record_timing)
      m.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    if (m.valid_ppl < best_valid) {
      best_valid = m.valid_ppl;
      result.best = params;
      result.best_epoch = epoch;
    }
    result.epochs.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  return result;
}

GateTrainResult train_iog(const TrainConfig &config, const TokenStream &train,
                          const TokenStream &valid, const LMParams<float> &base,
                          IOGParams<float> gate, const EpochCallback &on_epoch) {
  config.validate();
  if (config.phase != Phase::iog)
    throw std::invalid_argument("train_iog: config phase must be 'iog'");
  if (gate.config.vocab_size != base.config.vocab_size)
    throw std::invalid_argument("train_iog: gate and base vocabulary sizes differ");
  const auto batches = batchify(train, config.batch_size, config.bptt_length);
  if (batches.block_count() == 0)
    throw std::invalid_argument("train_iog: training stream too short for one block");

  const std::size_t B = config.batch_size;
  const auto &gcfg = gate.config;
  const bool with_hidden = gcfg.variant == GateVariant::with_hidden;
  auto adam = AdamState<float>::for_tensors(gate.tensors());

  GateTrainResult result;
  double best_valid = INFINITY;
  std::vector<IOGParams<float>> lane_grads(B);
  std::vector<double> lane_nll(B);

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto t0 = Clock::now();
    const double lr = config.lr_for_epoch(epoch);
    std::vector<HiddenState<float>> states(B, HiddenState<float>::zeros(base.config));
    std::vector<GateState<float>> gstates(B, GateState<float>::zeros(gcfg));
    double epoch_nll = 0.0;
    std::size_t epoch_tokens = 0;

    for (std::size_t k = 0; k < batches.block_count(); ++k) {
      const Batch batch = batches.block(k);
      for_each_lane(B, config.threads, [&](std::size_t b) {
        Rng rng = Rng::derive(config.seed, {epoch, k, b});
        const std::size_t L = batch.inputs[b].size();
        std::vector<GateTrace<float>> trace;
        std::vector<Vector<float>> logits;
        trace.reserve(L);
        logits.reserve(L);
        double nll = 0.0;
        Vector<float> z(gcfg.vocab_size);
        for (std::size_t t = 0; t < L; ++t) {
          const WordIndex input = batch.inputs[b][t];
          auto step = forward_step<float>(base, states[b], input);
          std::optional<Vector<float>> mask;
          if (config.dropout_rate > 0.0) {
            Vector<float> m(gcfg.gate_dim);
            const float keep = static_cast<float>(1.0 / (1.0 - config.dropout_rate));
            for (auto &x : m) x = rng.uniform() < config.dropout_rate ? 0.0f : keep;
            mask = std::move(m);
          }
          std::span<const float> h;
          if (with_hidden) h = step.h.back().span();
          trace.push_back(
              compute_gate<float>(gate, input, h, gstates[b], mask ? &*mask : nullptr));
          for (std::size_t v = 0; v < z.size(); ++v)
            z[v] = trace.back().gate[v] * step.logits[v];
          nll += cross_entropy_from_logits<float>(z.span(), batch.targets[b][t]);
          logits.push_back(std::move(step.logits));
        }
        lane_nll[b] = nll;
        lane_grads[b] = gate_backward<float>(gate, trace, logits, batch.targets[b]);
      });

      auto grads = IOGParams<float>::zeros(gcfg);
      const float inv_b = 1.0f / static_cast<float>(B);
      for (std::size_t b = 0; b < B; ++b) {
        accumulate(grads.tensors(), const_view(lane_grads[b]), inv_b);
        epoch_nll += lane_nll[b];
        epoch_tokens += batch.inputs[b].size();
      }
      check_finite(epoch_nll, epoch, k);
      clip_global_norm(grads.tensors(), config.grad_clip_norm);
      step_optimizer(config, gate.tensors(), const_view(grads), adam, lr);
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.lr = lr;
    m.train_ppl = std::exp(epoch_nll / static_cast<double>(epoch_tokens));
    EvalOptions eo;
    eo.threads = config.threads;
    m.valid_ppl = perplexity<float>(base, &gate, valid, eo).perplexity;
    check_finite(m.valid_ppl, epoch, batches.block_count());
    if (config.record_timing)
      m.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    if (m.valid_ppl < best_valid) {
      best_valid = m.valid_ppl;
      result.best = gate;
      result.best_epoch = epoch;
    }
    result.epochs.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  return result;
}

} // namespace ioglm
