// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ioglm/corpus.hpp"
#include "ioglm/gate.hpp"
#include "ioglm/model.hpp"
#include "ioglm/optim.hpp"

namespace ioglm {

enum class Phase { base, iog };
enum class OptimizerKind { sgd, adam };

std::string to_string(Phase p);
std::string to_string(OptimizerKind k);
Phase parse_phase(const std::string &name);
OptimizerKind parse_optimizer(const std::string &name);

struct TrainConfig {
  Phase phase = Phase::base;
  std::size_t batch_size = 20;
  std::size_t bptt_length = 35;
  std::size_t max_epochs = 39;
  OptimizerKind optimizer = OptimizerKind::sgd;
  double initial_lr = 20.0;
  LrSchedule lr_schedule = LrSchedule::step;
  double lr_decay = 1.0 / 1.2;
  std::size_t decay_start = 6;
  double dropout_rate = 0.5;
  double grad_clip_norm = 5.0;
  std::uint64_t seed = 1;
  std::size_t gate_dim = 300;
  GateVariant gate_variant = GateVariant::input_only;
  std::size_t threads = 1;
  bool record_timing = false;

  /// Medium-LSTM style recipe: SGD, clip 5, /1.2 per epoch after 6. The loss
  /// is a per-token mean, so the step size is 20 rather than 1.
  static TrainConfig base_defaults();
  /// Gate recipe: D_g 300, dropout 0.5 on e', Adam lr 0.001 decayed by
  /// 1/sqrt(epoch), 5 epochs, no clipping.
  static TrainConfig iog_defaults();

  void validate() const;
  double lr_for_epoch(std::size_t epoch) const;
  /// Ordered key/value echo of every field (timing excluded).
  std::vector<std::pair<std::string, std::string>> echo() const;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_ppl = 0.0;
  double valid_ppl = 0.0;
  std::optional<double> wall_seconds;

  /// One JSON-lines record; wall_seconds is null unless timing was on.
  std::string to_json() const;
};

using EpochCallback = std::function<void(const EpochMetrics &)>;

struct BaseTrainResult {
  LMParams<float> best;
  std::size_t best_epoch = 0;
  std::vector<EpochMetrics> epochs;
};

struct GateTrainResult {
  IOGParams<float> best;
  std::size_t best_epoch = 0;
  std::vector<EpochMetrics> epochs;
};

/// Raised when a training loss turns non-finite.
struct TrainingDiverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Truncated BPTT over B lanes with state carry, clipping, and best-valid
/// selection.
BaseTrainResult train_base(const TrainConfig &config, const TokenStream &train,
                           const TokenStream &valid, LMParams<float> params,
                           const EpochCallback &on_epoch = {});

/// Trains only the gate; `base` is read-only and runs without dropout.
GateTrainResult train_iog(const TrainConfig &config, const TokenStream &train,
                          const TokenStream &valid, const LMParams<float> &base,
                          IOGParams<float> gate, const EpochCallback &on_epoch = {});

/// Gate configuration matching `base` for the given training config.
GateConfig gate_config_for(const LMParams<float> &base, const TrainConfig &config);

} // namespace ioglm
