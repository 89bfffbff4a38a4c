// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "doctest.h"
#include "ioglm/eval.hpp"
#include "ioglm/training.hpp"
#include "toy.hpp"

using namespace ioglm;
using testing::cyclic_stream;

namespace {
template <typename P>
std::uint64_t params_checksum(const P &p) {
  return checksum<float>(p.tensors());
}

TrainConfig toy_iog_config() {
  auto c = TrainConfig::iog_defaults();
  c.batch_size = 4;
  c.bptt_length = 5;
  c.gate_dim = 8;
  return c;
}
} // namespace

TEST_CASE("recipe defaults") {
  const auto base = TrainConfig::base_defaults();
  CHECK(base.phase == Phase::base);
  CHECK(base.optimizer == OptimizerKind::sgd);
  CHECK(base.grad_clip_norm == 5.0);
  CHECK(base.lr_schedule == LrSchedule::step);

  const auto iog = TrainConfig::iog_defaults();
  CHECK(iog.phase == Phase::iog);
  CHECK(iog.gate_dim == 300);
  CHECK(iog.dropout_rate == 0.5);
  CHECK(iog.optimizer == OptimizerKind::adam);
  CHECK(iog.initial_lr == 0.001);
  CHECK(iog.lr_schedule == LrSchedule::inverse_sqrt_epoch);
  CHECK(iog.max_epochs == 5);
  CHECK(iog.batch_size == base.batch_size);
  CHECK(iog.bptt_length == base.bptt_length);
}

TEST_CASE("config validation and echo") {
  auto c = TrainConfig::base_defaults();
  c.dropout_rate = 1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = TrainConfig::base_defaults();
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = TrainConfig::base_defaults();
  c.initial_lr = -1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);

  const auto echo = TrainConfig::iog_defaults().echo();
  bool found = false;
  for (const auto &[k, v] : echo)
    if (k == "dropout_rate") found = v == "0.5";
  CHECK(found);
  CHECK(parse_phase("iog") == Phase::iog);
  CHECK(parse_optimizer("adam") == OptimizerKind::adam);
  CHECK_THROWS(parse_optimizer("rmsprop"));
}

TEST_CASE("epoch metrics json") {
  EpochMetrics m{2, 0.5, 3.25, 4.0, std::nullopt};
  CHECK(m.to_json() ==
        R"({"epoch":2,"lr":0.5,"train_ppl":3.25,"valid_ppl":4,"wall_seconds":null})");
  m.wall_seconds = 1.5;
  CHECK(m.to_json().find(R"("wall_seconds":1.5)") != std::string::npos);
}

TEST_CASE("a random-init model scores close to V") {
  const LMConfig cfg{40, 16, 16, 1, CellKind::lstm, false};
  const auto p = init_params<float>(cfg, 5);
  const auto r = perplexity<float>(p, nullptr, testing::random_stream(2000, 40, 3));
  CHECK(std::abs(r.perplexity - 40.0) / 40.0 < 0.05);
}

TEST_CASE("a toy corpus is memorized") {
  const LMConfig cfg{12, 16, 16, 1, CellKind::lstm, false};
  const auto train = cyclic_stream(200, 10, 12);
  const auto r = train_base(testing::toy_base_config(), train, train, init_params<float>(cfg, 3));
  REQUIRE(r.epochs.size() == 50);
  CHECK(r.epochs.back().train_ppl < 1.5);
  CHECK(r.epochs.front().train_ppl > r.epochs.back().train_ppl);
  CHECK(r.best_epoch >= 1);
  for (const auto &e : r.epochs) CHECK_FALSE(e.wall_seconds.has_value());
}

TEST_CASE("base training is deterministic") {
  const LMConfig cfg{12, 8, 8, 1, CellKind::lstm, false};
  const auto train = cyclic_stream(400, 7, 12, 0.2, 4);
  auto tc = testing::toy_base_config();
  tc.max_epochs = 3;
  tc.dropout_rate = 0.3;
  const auto a = train_base(tc, train, train, init_params<float>(cfg, 1));
  const auto b = train_base(tc, train, train, init_params<float>(cfg, 1));
  for (std::size_t e = 0; e < 3; ++e) {
    CHECK(a.epochs[e].train_ppl == b.epochs[e].train_ppl);
    CHECK(a.epochs[e].valid_ppl == b.epochs[e].valid_ppl);
  }
  CHECK(params_checksum(a.best) == params_checksum(b.best));

  tc.threads = 3;
  const auto c = train_base(tc, train, train, init_params<float>(cfg, 1));
  CHECK(c.epochs[2].train_ppl == a.epochs[2].train_ppl);
  CHECK(params_checksum(c.best) == params_checksum(a.best));
}

TEST_CASE("best-validation selection") {
  const LMConfig cfg{12, 8, 8, 1, CellKind::lstm, false};
  const auto train = cyclic_stream(400, 7, 12, 0.2, 4);
  auto tc = testing::toy_base_config();
  tc.max_epochs = 6;
  const auto r = train_base(tc, train, train, init_params<float>(cfg, 1));
  double best = INFINITY;
  std::size_t best_epoch = 0;
  for (const auto &e : r.epochs)
    if (e.valid_ppl < best) best = e.valid_ppl, best_epoch = e.epoch;
  CHECK(r.best_epoch == best_epoch);
  CHECK(perplexity<float>(r.best, nullptr, train).perplexity == best);
}

TEST_CASE("divergence aborts") {
  const LMConfig cfg{12, 8, 8, 1, CellKind::elman, false};
  auto p = init_params<float>(cfg, 1);
  p.output_bias[0] = NAN;
  const auto train = cyclic_stream(200, 7, 12);
  CHECK_THROWS_AS(train_base(testing::toy_base_config(), train, train, p), TrainingDiverged);
}

TEST_CASE("phase mismatch is rejected") {
  const LMConfig cfg{12, 8, 8, 1, CellKind::lstm, false};
  const auto train = cyclic_stream(200, 7, 12);
  const auto p = init_params<float>(cfg, 1);
  CHECK_THROWS_AS(train_base(toy_iog_config(), train, train, p), std::invalid_argument);
  const auto gate = init_gate<float>(gate_config_for(p, toy_iog_config()), 1);
  CHECK_THROWS_AS(train_iog(testing::toy_base_config(), train, train, p, gate),
                  std::invalid_argument);
}

TEST_CASE("gate training leaves the base untouched and emits the recipe schedule") {
  const auto &base = testing::memorized_cycle_model();
  const auto train = cyclic_stream(400, 10, 12, 0.1, 6);
  const auto before = params_checksum(base);
  const auto cfg = toy_iog_config();
  const auto gate0 = init_gate<float>(gate_config_for(base, cfg), cfg.seed);
  std::vector<EpochMetrics> seen;
  const auto r = train_iog(cfg, train, train, base, gate0,
                           [&](const EpochMetrics &m) { seen.push_back(m); });
  CHECK(params_checksum(base) == before);
  REQUIRE(seen.size() == 5);
  for (std::size_t e = 1; e <= 5; ++e)
    CHECK(std::abs(seen[e - 1].lr - 0.001 / std::sqrt(double(e))) < 1e-12);
  CHECK(params_checksum(r.best) != params_checksum(gate0));
}

TEST_CASE("gate training with lr 0 is a no-op") {
  const auto &base = testing::memorized_cycle_model();
  const auto train = cyclic_stream(400, 10, 12, 0.1, 6);
  auto cfg = toy_iog_config();
  cfg.initial_lr = 0.0;
  const auto gate0 = init_gate<float>(gate_config_for(base, cfg), cfg.seed);
  const auto r = train_iog(cfg, train, train, base, gate0);
  CHECK(params_checksum(r.best) == params_checksum(gate0));
  const double at_init = perplexity<float>(base, &gate0, train).perplexity;
  for (const auto &e : r.epochs) CHECK(e.valid_ppl == at_init);
}

TEST_CASE("gate training is deterministic across thread counts") {
  const auto &base = testing::memorized_cycle_model();
  const auto train = cyclic_stream(400, 10, 12, 0.1, 6);
  auto cfg = toy_iog_config();
  cfg.max_epochs = 2;
  for (auto v : {GateVariant::input_only, GateVariant::with_hidden, GateVariant::lstm_gate}) {
    cfg.gate_variant = v;
    cfg.threads = 1;
    const auto gate0 = init_gate<float>(gate_config_for(base, cfg), cfg.seed);
    const auto a = train_iog(cfg, train, train, base, gate0);
    cfg.threads = 4;
    const auto b = train_iog(cfg, train, train, base, gate0);
    CHECK(params_checksum(a.best) == params_checksum(b.best));
    CHECK(a.epochs.back().valid_ppl == b.epochs.back().valid_ppl);
  }
}
