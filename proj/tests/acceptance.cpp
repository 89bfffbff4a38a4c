// SPDX-License-Identifier: Apache-2.0
// Acceptance runner: prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.
//
//   ioglm_acceptance --cli PATH [--only N[,N...]] [--workdir DIR]

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "ioglm/checkpoint.hpp"
#include "ioglm/eval.hpp"
#include "ioglm/optim.hpp"
#include "ioglm/synthetic.hpp"
#include "ioglm/training.hpp"
#include "json.hpp"
#include "toy.hpp"

namespace fs = std::filesystem;
using namespace ioglm;
using json = nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char *f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

std::string read_file(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<json> read_json_lines(const fs::path &p) {
  std::vector<json> out;
  std::istringstream in(read_file(p));
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) out.push_back(json::parse(line));
  return out;
}

struct Cli {
  std::string exe;
  fs::path work;

  struct Result {
    int code = -1;
    std::string out, err;
  };

  Result operator()(const std::string &args) const {
    const auto out = work / "last.stdout", err = work / "last.stderr";
    const std::string cmd = "cd '" + work.string() + "' && '" + exe + "' " + args + " >'" +
                            out.string() + "' 2>'" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = read_file(out);
    r.err = read_file(err);
    return r;
  }
};

// -- Criterion 1 -------------------------------------------------------------

Outcome gradient_oracle_suite() {
  const auto t0 = Clock::now();
  Rng rng(2024);
  std::size_t configs = 0, coords = 0;
  double worst = 0.0;
  std::uint64_t seed = 1;
  for (auto cell : {CellKind::elman, CellKind::lstm})
    for (bool tied : {false, true})
      for (auto variant :
           {GateVariant::input_only, GateVariant::with_hidden, GateVariant::lstm_gate}) {
        const std::size_t V = 5 + rng.below(16); // 5..20
        const std::size_t D = 3 + rng.below(14); // 3..16
        const std::size_t layers = 1 + rng.below(2);
        const std::size_t steps = 1 + rng.below(3);
        const double dropout = rng.uniform() < 0.5 ? 0.25 : 0.0;
        const LMConfig cfg{V, D, D, layers, cell, tied};
        const auto m = testing::check_model_gradients(cfg, steps, seed++, dropout, 150);
        const std::size_t dg = 2 + rng.below(15);
        const auto g = testing::check_gate_gradients(cfg, variant, dg, steps, seed++, 150);
        worst = std::max({worst, m.max_rel, g.max_rel});
        coords += m.coords + g.coords;
        ++configs;
      }
  const double secs = seconds_since(t0);
  return {configs >= 12 && worst < 1e-3 && secs < 120.0,
          std::to_string(configs) + " configurations, " + std::to_string(coords) +
              " coordinates, max relative error " + fmt("%.2e", worst) + " (< 1e-3), " +
              fmt("%.2f", secs) + " s (< 120 s)"};
}

// -- Criterion 2 -------------------------------------------------------------

Outcome identity_gate_equivalence() {
  const auto t0 = Clock::now();
  const LMConfig cfg{200, 24, 24, 2, CellKind::lstm, false};
  auto model = init_params<float>(cfg, 5);
  for (auto &x : model.output.span()) x *= 20.0f; // sharpen the distribution
  const auto stream = testing::random_stream(10000, 200, 6);
  const double plain = perplexity<float>(model, nullptr, stream).perplexity;
  double worst = 0.0;
  for (auto v : {GateVariant::input_only, GateVariant::with_hidden, GateVariant::lstm_gate}) {
    auto gate = init_gate<float>({200, 16, 24, v}, 7);
    Rng rng(3);
    for (auto &x : gate.weight.span()) x = static_cast<float>(rng.uniform(-1, 1));
    EvalOptions eo;
    eo.force_identity_gate = true;
    worst = std::max(worst, std::abs(perplexity<float>(model, &gate, stream, eo).perplexity -
                                     plain));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-9 && secs < 10.0,
          "10000-token stream, ungated perplexity " + fmt("%.6f", plain) +
              ", max |identity-gated - ungated| " + fmt("%.1e", worst) + " (<= 1e-9), " +
              fmt("%.2f", secs) + " s (< 10 s)"};
}

// -- Criteria 4 and 9: the synthetic experiment ------------------------------

/// Experiment settings: a deliberately small LSTM trained to its best
/// validation epoch, then the gate recipe defaults. Both phases share the
/// batch geometry.
constexpr std::size_t kHidden = 32;
constexpr std::size_t kBaseEpochs = 12;
constexpr std::size_t kBatch = 4;
constexpr std::size_t kAnalysisMinFreq = 10;

struct SeedRun {
  std::uint64_t seed = 0;
  double base_ppl = 0, gated_ppl = 0;
  std::size_t markers = 0, markers_ok = 0;
  std::vector<std::string> rows;
  double secs = 0;
};

TokenStream encode_lines(const std::vector<std::string> &lines, const Vocabulary &v) {
  std::string text;
  for (const auto &l : lines) text += l + '\n';
  std::istringstream in(text);
  return encode(in, v);
}

SeedRun run_synthetic_seed(std::uint64_t seed) {
  const auto t0 = Clock::now();
  SyntheticSpec spec;
  spec.seed = seed;
  const auto corpus = generate_synthetic(spec);
  std::string text;
  for (const auto &l : corpus.train) text += l + '\n';
  std::istringstream in(text);
  const auto vocab = build_vocab(in);
  const auto train = encode_lines(corpus.train, vocab);
  const auto valid = encode_lines(corpus.valid, vocab);

  auto bc = TrainConfig::base_defaults();
  bc.max_epochs = kBaseEpochs;
  bc.batch_size = kBatch;
  bc.dropout_rate = 0.0;
  bc.seed = seed;
  const LMConfig mc{vocab.size(), kHidden, kHidden, 1, CellKind::lstm, false};
  const auto base = train_base(bc, train, valid, init_params<float>(mc, seed)).best;

  auto ic = TrainConfig::iog_defaults();
  ic.batch_size = kBatch;
  ic.seed = seed;
  const auto gate = train_iog(ic, train, valid, base,
                              init_gate<float>(gate_config_for(base, ic), seed))
                        .best;

  SeedRun r;
  r.seed = seed;
  r.base_ppl = perplexity<float>(base, nullptr, valid).perplexity;
  r.gated_ppl = perplexity<float>(base, &gate, valid).perplexity;

  const auto freq = frequency_table(train, vocab.size());
  for (std::size_t k = 0; k < corpus.markers.size(); ++k) {
    const auto &marker = corpus.markers[k];
    const auto id = static_cast<std::size_t>(
        std::find(corpus.words.begin(), corpus.words.end(), marker) - corpus.words.begin());
    const std::size_t succ = corpus.successor.at(id);
    const auto top = top_weighted_words(gate, marker, vocab, 5, kAnalysisMinFreq, freq);
    std::size_t hits = 0;
    for (const auto &w : top)
      if (std::find(corpus.words.begin(), corpus.words.end(), w.word) != corpus.words.end() &&
          corpus.class_of(w.word) == succ)
        ++hits;
    ++r.markers;
    if (hits >= 4) ++r.markers_ok;
    r.rows.push_back(format_analysis_row(marker, top) + "  [successor class " +
                     std::to_string(succ) + ": " + std::to_string(hits) + "/5]");
  }
  r.secs = seconds_since(t0);
  return r;
}

Outcome synthetic_improvement(const std::vector<SeedRun> &runs, double secs) {
  bool all = true;
  std::string detail;
  for (const auto &r : runs) {
    const double rel = (r.base_ppl - r.gated_ppl) / r.base_ppl;
    all = all && rel >= 0.01;
    detail += "seed " + std::to_string(r.seed) + ": " + fmt("%.3f", r.base_ppl) + " -> " +
              fmt("%.3f", r.gated_ppl) + " (" + fmt("%.2f", 100 * rel) + "%); ";
  }
  detail += "total " + fmt("%.0f", secs) + " s (expected < 600 s)";
  return {all && runs.size() == 3, detail};
}

Outcome analysis_sanity(const std::vector<SeedRun> &runs) {
  std::size_t seeds_ok = 0;
  std::string detail;
  for (const auto &r : runs) {
    const bool ok = r.markers_ok == r.markers;
    seeds_ok += ok;
    detail += "seed " + std::to_string(r.seed) + ": " + std::to_string(r.markers_ok) + "/" +
              std::to_string(r.markers) + " markers with >= 4 of top-5 in the successor class; ";
  }
  detail += std::to_string(seeds_ok) + "/3 seeds pass (majority needed)";
  return {seeds_ok * 2 > runs.size(), detail};
}

// -- Criteria 5 and 6 --------------------------------------------------------

Outcome ensemble_jensen_bound() {
  std::size_t checks = 0;
  double worst_margin = -INFINITY;
  const LMConfig cfg{30, 12, 12, 1, CellKind::lstm, false};
  const std::vector<TokenStream> streams{testing::random_stream(1000, 30, 1),
                                         testing::cyclic_stream(1000, 7, 30, 0.2, 2),
                                         testing::random_stream(300, 30, 3)};
  for (std::size_t M : {2u, 5u}) {
    std::vector<LMParams<float>> models;
    for (std::size_t i = 0; i < M; ++i) {
      auto p = init_params<float>(cfg, 100 + i);
      for (auto &x : p.output.span()) x *= 25.0f;
      models.push_back(std::move(p));
    }
    std::vector<const LMParams<float> *> ptrs;
    for (const auto &p : models) ptrs.push_back(&p);
    auto io = init_gate<float>({30, 8, 0, GateVariant::input_only}, 1);
    auto lg = init_gate<float>({30, 8, 0, GateVariant::lstm_gate}, 2);
    Rng rng(9);
    for (auto &x : io.weight.span()) x = static_cast<float>(rng.uniform(-1, 1));
    for (auto &x : lg.weight.span()) x = static_cast<float>(rng.uniform(-1, 1));
    for (const auto &s : streams)
      for (const IOGParams<float> *g : {static_cast<const IOGParams<float> *>(nullptr),
                                        static_cast<const IOGParams<float> *>(&io),
                                        static_cast<const IOGParams<float> *>(&lg)}) {
        const auto r = ensemble_perplexity<float>(ptrs, g, s);
        double mean = 0;
        for (const auto &m : r.members) mean += m.nll;
        mean /= static_cast<double>(M);
        worst_margin = std::max(worst_margin, r.nll - mean);
        ++checks;
      }
  }
  return {worst_margin <= 1e-9,
          std::to_string(checks) + " (M, stream, gate) cases for M in {2, 5}; max(ensemble NLL - "
                                   "mean member NLL) = " +
              fmt("%.3f", worst_margin) + " (<= 1e-9)"};
}

Outcome shared_gate_contract() {
  const LMConfig cfg{25, 8, 8, 1, CellKind::lstm, false};
  std::vector<LMParams<float>> models;
  for (int i = 0; i < 4; ++i) models.push_back(init_params<float>(cfg, 40 + i));
  std::vector<const LMParams<float> *> ptrs;
  for (const auto &p : models) ptrs.push_back(&p);
  const auto stream = testing::random_stream(500, 25, 4);
  std::size_t steps = 0, mismatches = 0;
  for (auto v : {GateVariant::input_only, GateVariant::lstm_gate}) {
    auto gate = init_gate<float>({25, 6, 0, v}, 3);
    Rng rng(5);
    for (auto &x : gate.weight.span()) x = static_cast<float>(rng.uniform(-2, 2));
    std::vector<std::uint64_t> first;
    GateObserver<float> obs = [&](std::size_t step, std::size_t member,
                                  std::span<const float> g) {
      const auto sum = checksum<float>({TensorRef<const float>{"g", {g.size()}, g}});
      if (member == 0) {
        first.push_back(sum);
        ++steps;
      } else if (first.at(step) != sum) {
        ++mismatches;
      }
    };
    ensemble_perplexity<float>(ptrs, &gate, stream, obs);
  }
  return {mismatches == 0 && steps == 2 * 499,
          "4 members, input_only and lstm_gate, " + std::to_string(steps) +
              " timesteps observed, " + std::to_string(mismatches) +
              " steps where a member saw a different gate checksum"};
}

// -- CLI-driven criteria -----------------------------------------------------

struct CliFixture {
  Cli cli;
  bool ready = false;
  std::string error;
};

/// Small synthetic corpus and base checkpoint shared by criteria 3, 7, 8, 10.
CliFixture prepare_cli(const std::string &exe, const fs::path &work) {
  CliFixture f{{exe, work}, false, {}};
  fs::create_directories(work);
  auto r = f.cli("--seed 11 synth-corpus --output data --train-tokens 8000 --valid-tokens 2000 "
                 "--test-tokens 2000");
  if (r.code != 0) return f.error = "synth-corpus failed: " + r.err, f;
  r = f.cli("--seed 11 train --train data/train.txt --valid data/valid.txt --output base.ckpt "
            "--metrics base.jsonl --embed-dim 16 --hidden-dim 16 --layers 1 --max-epochs 3 "
            "--batch-size 4 --dropout-rate 0");
  if (r.code != 0) return f.error = "train failed: " + r.err, f;
  f.ready = true;
  return f;
}

std::vector<std::uint64_t> array_checksums(const LMParams<float> &p) {
  std::vector<std::uint64_t> out;
  for (const auto &t : p.tensors()) out.push_back(checksum<float>({t}));
  return out;
}

Outcome frozen_base_contract(const CliFixture &f) {
  if (!f.ready) return {false, f.error};
  const auto base_bytes = read_file(f.cli.work / "base.ckpt");
  const auto before = array_checksums(load_checkpoint(f.cli.work / "base.ckpt").model);
  const auto r = f.cli("--seed 11 train-iog --base base.ckpt --train data/train.txt --valid "
                       "data/valid.txt --output gate.ckpt --metrics gate.jsonl");
  if (r.code != 0) return {false, "train-iog failed: " + r.err};
  const auto gated = load_checkpoint(f.cli.work / "gate.ckpt");
  const auto after = array_checksums(gated.model);
  const auto reread = array_checksums(load_checkpoint(f.cli.work / "base.ckpt").model);
  const bool same_file = read_file(f.cli.work / "base.ckpt") == base_bytes;
  const bool pass = before == after && before == reread && same_file && gated.gate.has_value();
  return {pass, std::to_string(before.size()) +
                    " base arrays; checksums in the gated checkpoint " +
                    (before == after ? "identical" : "DIFFER") + "; base checkpoint file " +
                    (same_file ? "unchanged" : "CHANGED")};
}

Outcome recipe_fidelity(const CliFixture &f) {
  if (!f.ready) return {false, f.error};
  if (!fs::exists(f.cli.work / "gate.jsonl")) return {false, "no metrics from the train-iog run"};
  const auto lines = read_json_lines(f.cli.work / "gate.jsonl");
  double worst = 0;
  for (std::size_t e = 0; e < lines.size(); ++e)
    worst = std::max(worst, std::abs(lines[e]["lr"].get<double>() -
                                     0.001 / std::sqrt(static_cast<double>(e + 1))));
  const auto ckpt = load_checkpoint(f.cli.work / "gate.ckpt");
  const auto dropout = ckpt.config_value("dropout_rate").value_or("missing");
  const auto dim = ckpt.gate ? ckpt.gate->config.gate_dim : 0;
  const bool pass = lines.size() == 5 && worst <= 1e-12 && dropout == "0.5" && dim == 300;
  return {pass, std::to_string(lines.size()) + " epochs, max |lr - 0.001/sqrt(e)| = " +
                    fmt("%.1e", worst) + ", echoed dropout_rate = " + dropout +
                    ", gate dim = " + std::to_string(dim)};
}

Outcome variant_harness(const CliFixture &f) {
  if (!f.ready) return {false, f.error};
  const auto r = f.cli("--seed 11 variant-compare --base base.ckpt --train data/train.txt "
                       "--valid data/valid.txt --test data/test.txt --output compare.json");
  if (r.code != 0) return {false, "variant-compare failed: " + r.err};
  const auto j = json::parse(read_file(f.cli.work / "compare.json"));
  const auto base = load_checkpoint(f.cli.work / "base.ckpt").model.config;
  const long long V = static_cast<long long>(base.vocab_size);
  const long long Dh = static_cast<long long>(base.hidden_dim), Dg = 300;
  std::map<std::string, long long> expected{
      {"input_only", 0}, {"with_hidden", V * Dh}, {"lstm_gate", 4 * Dg * (2 * Dg) + 4 * Dg}};
  bool deltas = j["variants"].size() == 3;
  std::string best;
  double best_ppl = INFINITY;
  std::string detail;
  for (const auto &row : j["variants"]) {
    const auto name = row["variant"].get<std::string>();
    deltas = deltas && expected.count(name) && row["diff"].get<long long>() == expected[name];
    if (row["valid_ppl"].get<double>() < best_ppl)
      best_ppl = row["valid_ppl"].get<double>(), best = name;
    detail += name + " diff " + std::to_string(row["diff"].get<long long>()) + " (expected " +
              std::to_string(expected.count(name) ? expected[name] : -1) + "), valid " +
              fmt("%.3f", row["valid_ppl"].get<double>()) + "; ";
  }
  std::size_t table_rows = 0;
  std::istringstream table(r.out);
  for (std::string line; std::getline(table, line);)
    if (line.starts_with("input_only") || line.starts_with("with_hidden") ||
        line.starts_with("lstm_gate"))
      ++table_rows;
  detail += "best variant on validation: " + best + " (reported, not gated)";
  return {deltas && table_rows == 3, detail};
}

Outcome determinism(const CliFixture &f) {
  if (!f.ready) return {false, f.error};
  const Cli &cli = f.cli;
  struct Case {
    std::string name, args;
    std::vector<std::string> files;
  };
  const std::vector<Case> cases{
      {"synth-corpus", "--seed 5 synth-corpus --output rerun_data --train-tokens 3000 "
                       "--valid-tokens 500 --test-tokens 500",
       {"rerun_data/train.txt", "rerun_data/valid.txt", "rerun_data/classes.tsv"}},
      {"build-vocab", "build-vocab --train data/train.txt --output rerun_vocab.txt",
       {"rerun_vocab.txt"}},
      {"train", "--seed 3 train --train data/train.txt --valid data/valid.txt --output "
                "rerun_base.ckpt --metrics rerun_base.jsonl --embed-dim 12 --hidden-dim 12 "
                "--layers 1 --max-epochs 2 --batch-size 4 --dropout-rate 0.3",
       {"rerun_base.ckpt", "rerun_base.jsonl"}},
      {"train-iog", "--seed 3 train-iog --base base.ckpt --train data/train.txt --valid "
                    "data/valid.txt --output rerun_gate.ckpt --metrics rerun_gate.jsonl "
                    "--gate-dim 20 --max-epochs 2 --gate-variant lstm_gate",
       {"rerun_gate.ckpt", "rerun_gate.jsonl"}},
      {"eval", "eval --checkpoint gate.ckpt --data data/test.txt", {}},
      {"ensemble-eval", "ensemble-eval --member base.ckpt --member rerun_base.ckpt --gate "
                        "gate.ckpt --data data/test.txt",
       {}},
      {"analyze", "analyze --checkpoint gate.ckpt --words m0,m1,m2 --corpus data/train.txt "
                  "--min-freq 5",
       {}},
      {"variant-compare", "--seed 3 variant-compare --base base.ckpt --train data/train.txt "
                          "--valid data/valid.txt --test data/test.txt --gate-dim 20 "
                          "--max-epochs 1 --output rerun_compare.json",
       {"rerun_compare.json"}},
  };
  std::size_t identical = 0;
  std::string failures;
  for (const auto &c : cases) {
    std::vector<std::string> first;
    bool ok = true;
    for (int round = 0; round < 2 && ok; ++round) {
      const auto r = cli(c.args);
      ok = r.code == 0;
      std::vector<std::string> snapshot{r.out};
      for (const auto &file : c.files) snapshot.push_back(read_file(cli.work / file));
      if (round == 0)
        first = snapshot;
      else
        ok = snapshot == first;
    }
    if (ok)
      ++identical;
    else
      failures += " " + c.name;
  }
  // Thread count must not change the result either.
  const auto t1 = cli("--seed 3 --threads 1 train --train data/train.txt --valid "
                      "data/valid.txt --output thr1.ckpt --embed-dim 12 --hidden-dim 12 "
                      "--layers 1 --max-epochs 1 --batch-size 4");
  const auto t3 = cli("--seed 3 --threads 3 train --train data/train.txt --valid "
                      "data/valid.txt --output thr3.ckpt --embed-dim 12 --hidden-dim 12 "
                      "--layers 1 --max-epochs 1 --batch-size 4");
  const bool threads_ok = t1.code == 0 && t3.code == 0 &&
                          read_file(cli.work / "thr1.ckpt") == read_file(cli.work / "thr3.ckpt");
  return {identical == cases.size() && threads_ok,
          std::to_string(identical) + "/" + std::to_string(cases.size()) +
              " commands byte-identical on rerun (stdout, checkpoints, metrics)" +
              (failures.empty() ? "" : "; differing:" + failures) +
              "; --threads 1 vs 3 checkpoints " + (threads_ok ? "identical" : "DIFFER")};
}

} // namespace

int main(int argc, char **argv) {
  std::string cli_path;
  std::set<int> only;
  fs::path work = fs::temp_directory_path() / ("ioglm_acceptance_" + std::to_string(::getpid()));
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--cli" && i + 1 < argc) {
      cli_path = fs::absolute(argv[++i]).string();
    } else if (a == "--workdir" && i + 1 < argc) {
      work = fs::absolute(argv[++i]);
    } else if (a == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string n; std::getline(ss, n, ',');) only.insert(std::stoi(n));
    } else {
      std::cerr << "usage: ioglm_acceptance --cli PATH [--only N,...] [--workdir DIR]\n";
      return 2;
    }
  }
  auto wanted = [&](int n) { return only.empty() || only.count(n) > 0; };

  struct Criterion {
    int id;
    std::string title;
    Outcome outcome;
  };
  std::vector<Criterion> results;
  auto record = [&](int id, const std::string &title, const std::function<Outcome()> &fn) {
    if (!wanted(id)) return;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception &e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << id << " " << title << ": "
              << o.detail << '\n'
              << std::flush;
    results.push_back({id, title, o});
  };

  record(1, "gradient oracle suite", gradient_oracle_suite);
  record(2, "identity-gate equivalence", identity_gate_equivalence);

  CliFixture fixture;
  const bool need_cli = wanted(3) || wanted(7) || wanted(8) || wanted(10);
  if (need_cli) {
    if (cli_path.empty())
      fixture.error = "no --cli binary given";
    else
      fixture = prepare_cli(cli_path, work);
  }
  record(3, "frozen-base contract", [&] { return frozen_base_contract(fixture); });

  std::vector<SeedRun> runs;
  double synth_secs = 0;
  if (wanted(4) || wanted(9)) {
    const auto t0 = Clock::now();
    for (std::uint64_t s : {1u, 2u, 3u}) runs.push_back(run_synthetic_seed(s));
    synth_secs = seconds_since(t0);
  }
  record(4, "synthetic-corpus improvement", [&] { return synthetic_improvement(runs, synth_secs); });
  record(5, "ensemble Jensen bound", ensemble_jensen_bound);
  record(6, "shared-gate ensemble contract", shared_gate_contract);
  record(7, "gate recipe fidelity", [&] { return recipe_fidelity(fixture); });
  record(8, "variant comparison harness", [&] { return variant_harness(fixture); });
  record(9, "analysis sanity", [&] { return analysis_sanity(runs); });
  record(10, "determinism", [&] { return determinism(fixture); });

  if (!runs.empty()) {
    std::cout << "\nanalysis rows (top-5 gate-weighted words per class marker):\n";
    for (const auto &r : runs) {
      std::cout << "seed " << r.seed << " (" << fmt("%.0f", r.secs) << " s)\n";
      for (const auto &row : r.rows) std::cout << "  " << row << '\n';
    }
  }

  std::size_t passed = 0;
  for (const auto &c : results) passed += c.outcome.pass;
  std::cout << "\n" << passed << "/" << results.size() << " acceptance criteria passed\n";
  if (need_cli && !cli_path.empty() && only.empty()) fs::remove_all(work);
  return passed == results.size() ? 0 : 1;
}
