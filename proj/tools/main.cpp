// SPDX-License-Identifier: Apache-2.0
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ioglm/checkpoint.hpp"
#include "ioglm/compare.hpp"
#include "ioglm/config.hpp"
#include "ioglm/corpus.hpp"
#include "ioglm/eval.hpp"
#include "ioglm/synthetic.hpp"
#include "ioglm/training.hpp"

namespace fs = std::filesystem;
using namespace ioglm;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::string config;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  bool timing = false;
};

/// TrainConfig fields exposed as flags; enums travel as strings until parsed.
struct TrainFlags {
  TrainConfig tc;
  std::string optimizer, schedule, variant;

  explicit TrainFlags(TrainConfig defaults)
      : tc(defaults), optimizer(to_string(defaults.optimizer)),
        schedule(to_string(defaults.lr_schedule)), variant(to_string(defaults.gate_variant)) {}

  void add_to(CLI::App *app, bool with_gate) {
    app->add_option("--batch-size", tc.batch_size, "Lanes per block")->capture_default_str();
    app->add_option("--bptt-length", tc.bptt_length, "Timesteps per block")->capture_default_str();
    app->add_option("--max-epochs", tc.max_epochs)->capture_default_str();
    app->add_option("--optimizer", optimizer, "sgd or adam")->capture_default_str();
    app->add_option("--initial-lr", tc.initial_lr)->capture_default_str();
    app->add_option("--lr-schedule", schedule, "inverse_sqrt_epoch, constant or step")
        ->capture_default_str();
    app->add_option("--lr-decay", tc.lr_decay, "Per-epoch factor for the step schedule")
        ->capture_default_str();
    app->add_option("--decay-start", tc.decay_start, "Last epoch before step decay")
        ->capture_default_str();
    app->add_option("--dropout-rate", tc.dropout_rate)->capture_default_str();
    app->add_option("--grad-clip-norm", tc.grad_clip_norm, "0 disables clipping")
        ->capture_default_str();
    if (with_gate) {
      app->add_option("--gate-dim", tc.gate_dim)->capture_default_str();
      app->add_option("--gate-variant", variant, "input_only, with_hidden or lstm_gate")
          ->capture_default_str();
    }
  }

  TrainConfig resolve(const Globals &g) {
    tc.optimizer = parse_optimizer(optimizer);
    tc.lr_schedule = parse_lr_schedule(schedule);
    tc.gate_variant = parse_gate_variant(variant);
    tc.seed = g.seed;
    tc.threads = g.threads;
    tc.record_timing = g.timing;
    tc.validate();
    return tc;
  }
};

std::string option_key(const CLI::Option *opt) {
  const auto &names = opt->get_lnames();
  if (names.empty()) return {};
  std::string key = names.front();
  for (auto &c : key)
    if (c == '-') c = '_';
  return key;
}

/// Applies `key = value` pairs to options the command line left unset.
/// Keys that belong to other subcommands are ignored; unknown keys fail.
void apply_config(CLI::App &app, CLI::App *active, const KeyValues &kv,
                  const std::string &source) {
  std::map<std::string, CLI::Option *> local;
  std::set<std::string> known;
  auto collect = [&](CLI::App *a, bool mine) {
    for (auto *opt : a->get_options()) {
      const auto key = option_key(opt);
      if (key.empty() || key == "help" || key == "config") continue;
      known.insert(key);
      if (mine) local[key] = opt;
    }
  };
  collect(&app, true);
  for (auto *sub : app.get_subcommands({})) collect(sub, sub == active);

  for (const auto &[key, value] : kv) {
    auto it = local.find(key);
    if (it == local.end()) {
      if (known.count(key)) continue;
      throw UsageError(source + ": unknown key '" + key + "'");
    }
    CLI::Option *opt = it->second;
    if (opt->count() > 0) continue;
    opt->add_result(value);
    opt->run_callback();
  }
}

void require_file(const std::string &path, const std::string &what) {
  if (path.empty()) throw UsageError("missing required --" + what);
  if (!fs::is_regular_file(path))
    throw std::runtime_error(what + " file not found: " + path);
  std::ifstream probe(path);
  if (!probe) throw std::runtime_error(what + " file not readable: " + path);
}

void require_output(const std::string &path, const std::string &what) {
  if (path.empty()) throw UsageError("missing required --" + what);
  const auto parent = fs::absolute(path).parent_path();
  if (!fs::is_directory(parent))
    throw std::runtime_error(what + " directory does not exist: " + parent.string());
}

void write_atomically(const std::string &path, const std::string &content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << content;
    if (!out.flush()) throw std::runtime_error("cannot write " + tmp);
  }
  fs::rename(tmp, path);
}

std::string num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string json_object(const ConfigEcho &kv) {
  std::string s = "{";
  for (std::size_t i = 0; i < kv.size(); ++i) {
    if (i) s += ',';
    s += '"' + kv[i].first + "\":\"" + kv[i].second + '"';
  }
  return s + "}";
}

/// Runs a training phase, echoing each epoch to stdout and collecting the
/// JSON-lines metrics for the metrics file.
struct MetricsSink {
  std::string lines;
  EpochCallback callback() {
    return [this](const EpochMetrics &m) {
      const auto line = m.to_json();
      lines += line + '\n';
      std::cout << line << '\n' << std::flush;
    };
  }
};

// ---------------------------------------------------------------------------

struct BuildVocabArgs {
  std::string train, output;
  std::size_t min_count = 1;
};

int cmd_build_vocab(const BuildVocabArgs &a) {
  require_file(a.train, "train");
  require_output(a.output, "output");
  const auto vocab = build_vocab_from_file(a.train, a.min_count);
  const auto stream = encode_file(a.train, vocab);
  std::string text;
  for (const auto &w : vocab.words()) text += w + '\n';
  write_atomically(a.output, text);
  std::cout << "{\"vocab_size\":" << vocab.size() << ",\"tokens\":" << stream.size() << "}\n";
  return 0;
}

struct TrainArgs {
  std::string train, valid, vocab, output, metrics;
  std::size_t embed_dim = 650, hidden_dim = 650, layers = 2;
  std::string cell = "lstm";
  bool tie_weights = false;
  std::size_t min_count = 1;
};

int cmd_train(const TrainArgs &a, TrainConfig tc) {
  require_file(a.train, "train");
  require_file(a.valid, "valid");
  if (!a.vocab.empty()) require_file(a.vocab, "vocab");
  require_output(a.output, "output");
  if (!a.metrics.empty()) require_output(a.metrics, "metrics");

  const auto vocab =
      a.vocab.empty() ? build_vocab_from_file(a.train, a.min_count) : Vocabulary::load(a.vocab);
  const auto train = encode_file(a.train, vocab);
  const auto valid = encode_file(a.valid, vocab);
  LMConfig mc{vocab.size(), a.embed_dim, a.hidden_dim, a.layers, parse_cell_kind(a.cell),
              a.tie_weights};
  mc.validate();

  std::cout << "{\"config\":" << json_object(tc.echo()) << "}\n";
  MetricsSink sink;
  auto result = train_base(tc, train, valid, init_params<float>(mc, tc.seed), sink.callback());

  Checkpoint ckpt{tc.echo(), vocab, std::move(result.best), std::nullopt};
  save_checkpoint(ckpt, a.output);
  if (!a.metrics.empty()) write_atomically(a.metrics, sink.lines);
  std::cout << "{\"best_epoch\":" << result.best_epoch << ",\"best_valid_ppl\":"
            << num(result.epochs[result.best_epoch - 1].valid_ppl) << "}\n";
  return 0;
}

/// The vocabulary a run must use: the checkpoint's, cross-checked against an
/// explicit vocabulary file when one is given.
const Vocabulary &checked_vocab(const Checkpoint &ckpt, const std::string &vocab_path) {
  if (!vocab_path.empty()) {
    require_file(vocab_path, "vocab");
    const auto file_vocab = Vocabulary::load(vocab_path);
    if (file_vocab.size() != ckpt.vocab.size())
      throw std::runtime_error("vocabulary mismatch: checkpoint has V=" +
                               std::to_string(ckpt.vocab.size()) + ", " + vocab_path +
                               " has V=" + std::to_string(file_vocab.size()));
    if (!(file_vocab == ckpt.vocab))
      throw std::runtime_error("vocabulary mismatch: " + vocab_path +
                               " orders words differently from the checkpoint");
  }
  return ckpt.vocab;
}

struct TrainIogArgs {
  std::string base, train, valid, vocab, output, metrics;
};

int cmd_train_iog(const TrainIogArgs &a, const TrainConfig &tc) {
  require_file(a.base, "base");
  require_file(a.train, "train");
  require_file(a.valid, "valid");
  require_output(a.output, "output");
  if (!a.metrics.empty()) require_output(a.metrics, "metrics");

  const auto base = load_checkpoint(a.base);
  const auto &vocab = checked_vocab(base, a.vocab);
  const auto train = encode_file(a.train, vocab);
  const auto valid = encode_file(a.valid, vocab);

  std::cout << "{\"config\":" << json_object(tc.echo()) << "}\n";
  MetricsSink sink;
  auto gate = init_gate<float>(gate_config_for(base.model, tc), tc.seed);
  auto result = train_iog(tc, train, valid, base.model, std::move(gate), sink.callback());

  Checkpoint ckpt{tc.echo(), vocab, base.model, std::move(result.best)};
  save_checkpoint(ckpt, a.output);
  if (!a.metrics.empty()) write_atomically(a.metrics, sink.lines);
  std::cout << "{\"best_epoch\":" << result.best_epoch << ",\"best_valid_ppl\":"
            << num(result.epochs[result.best_epoch - 1].valid_ppl) << "}\n";
  return 0;
}

struct EvalArgs {
  std::string checkpoint, data;
  bool force_identity_gate = false;
  std::size_t segments = 1;
  std::size_t warmup = 200;
};

int cmd_eval(const EvalArgs &a, const Globals &g) {
  require_file(a.checkpoint, "checkpoint");
  require_file(a.data, "data");
  const auto ckpt = load_checkpoint(a.checkpoint);
  const auto stream = encode_file(a.data, ckpt.vocab);
  EvalOptions eo;
  eo.segments = a.segments;
  eo.warmup = a.warmup;
  eo.threads = g.threads;
  eo.force_identity_gate = a.force_identity_gate;
  const auto report =
      perplexity<float>(ckpt.model, ckpt.gate ? &*ckpt.gate : nullptr, stream, eo);
  std::cout << report.to_json() << '\n';
  return 0;
}

struct EnsembleArgs {
  std::vector<std::string> members;
  std::string gate, data;
  bool force_identity_gate = false;
};

int cmd_ensemble_eval(const EnsembleArgs &a) {
  if (a.members.empty()) throw UsageError("ensemble-eval needs at least one --member");
  for (const auto &m : a.members) require_file(m, "member");
  if (!a.gate.empty()) require_file(a.gate, "gate");
  require_file(a.data, "data");

  std::vector<Checkpoint> members;
  for (const auto &m : a.members) {
    members.push_back(load_checkpoint(m));
    if (!(members.back().vocab == members.front().vocab))
      throw std::runtime_error("vocabulary mismatch between " + a.members.front() + " and " + m);
  }
  std::optional<Checkpoint> gate;
  if (!a.gate.empty()) {
    gate = load_checkpoint(a.gate);
    if (!gate->gate) throw std::runtime_error(a.gate + " holds no gate parameters");
    if (!(gate->vocab == members.front().vocab))
      throw std::runtime_error("vocabulary mismatch between the gate and the members");
  }
  const auto stream = encode_file(a.data, members.front().vocab);
  std::vector<const LMParams<float> *> ptrs;
  for (const auto &m : members) ptrs.push_back(&m.model);
  const auto report = ensemble_perplexity<float>(ptrs, gate ? &*gate->gate : nullptr, stream,
                                                 {}, a.force_identity_gate);
  std::cout << report.to_json() << '\n';
  return 0;
}

struct AnalyzeArgs {
  std::string checkpoint, corpus;
  std::vector<std::string> words;
  std::size_t k = 5;
  std::size_t min_freq = 100;
};

int cmd_analyze(const AnalyzeArgs &a) {
  require_file(a.checkpoint, "checkpoint");
  if (a.min_freq > 0) require_file(a.corpus, "corpus");
  const auto ckpt = load_checkpoint(a.checkpoint);
  if (!ckpt.gate) throw std::runtime_error(a.checkpoint + " holds no gate parameters");
  if (ckpt.gate->config.variant != GateVariant::input_only)
    throw std::runtime_error("analyze needs an input_only gate; " + a.checkpoint + " holds a " +
                             to_string(ckpt.gate->config.variant) +
                             " gate, whose weights depend on more than the input word");
  std::vector<std::size_t> freq(ckpt.vocab.size(), 0);
  if (!a.corpus.empty()) freq = frequency_table(encode_file(a.corpus, ckpt.vocab), freq.size());

  std::string out;
  for (const auto &w : a.words) {
    if (!ckpt.vocab.contains(w)) {
      out += w + "\t<oov>\n";
      continue;
    }
    out += format_analysis_row(w, top_weighted_words(*ckpt.gate, w, ckpt.vocab, a.k,
                                                     a.min_freq, freq)) +
           '\n';
  }
  std::cout << out;
  return 0;
}

struct CompareArgs {
  std::string base, train, valid, test, output;
  std::vector<std::string> variants{"input_only", "with_hidden", "lstm_gate"};
};

int cmd_variant_compare(const CompareArgs &a, const TrainConfig &tc) {
  require_file(a.base, "base");
  require_file(a.train, "train");
  require_file(a.valid, "valid");
  require_file(a.test, "test");
  if (!a.output.empty()) require_output(a.output, "output");
  std::vector<GateVariant> variants;
  for (const auto &v : a.variants) variants.push_back(parse_gate_variant(v));

  const auto base = load_checkpoint(a.base);
  const auto train = encode_file(a.train, base.vocab);
  const auto valid = encode_file(a.valid, base.vocab);
  const auto test = encode_file(a.test, base.vocab);
  const auto cmp = run_variant_comparison(base.model, train, valid, test, variants, tc);
  if (!a.output.empty()) write_atomically(a.output, cmp.to_json() + '\n');
  std::cout << cmp.to_table();
  return 0;
}

struct SynthArgs {
  std::string output;
  SyntheticSpec spec;
};

int cmd_synth(SynthArgs a, const Globals &g) {
  if (a.output.empty()) throw UsageError("missing required --output");
  a.spec.seed = g.seed;
  write_synthetic(generate_synthetic(a.spec), a.output);
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Input-to-output gated recurrent language models"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Flat 'key = value' file; flags override it");
  app.add_option("--seed", g.seed, "Seed for initialization, dropout and data generation")
      ->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads (results do not depend on it)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_flag("--timing", g.timing, "Record wall-clock seconds in metrics");

  BuildVocabArgs bv;
  auto *build = app.add_subcommand("build-vocab", "Build a frequency-ordered vocabulary file");
  build->add_option("--train", bv.train, "Training corpus");
  build->add_option("--output", bv.output, "Vocabulary file to write");
  build->add_option("--min-count", bv.min_count)->capture_default_str();

  TrainArgs ta;
  TrainFlags base_flags(TrainConfig::base_defaults());
  auto *train = app.add_subcommand("train", "Train a base language model");
  train->add_option("--train", ta.train, "Training corpus");
  train->add_option("--valid", ta.valid, "Validation corpus");
  train->add_option("--vocab", ta.vocab, "Vocabulary file (built from --train if absent)");
  train->add_option("--output", ta.output, "Checkpoint to write");
  train->add_option("--metrics", ta.metrics, "JSON-lines metrics file to write");
  train->add_option("--min-count", ta.min_count)->capture_default_str();
  train->add_option("--cell", ta.cell, "lstm or elman")->capture_default_str();
  train->add_option("--embed-dim", ta.embed_dim)->capture_default_str();
  train->add_option("--hidden-dim", ta.hidden_dim)->capture_default_str();
  train->add_option("--layers", ta.layers)->capture_default_str();
  train->add_flag("--tie-weights", ta.tie_weights, "Share the embedding with the output layer");
  base_flags.add_to(train, false);

  TrainIogArgs ti;
  TrainFlags iog_flags(TrainConfig::iog_defaults());
  auto *train_gate = app.add_subcommand("train-iog", "Train a gate on top of a frozen base");
  train_gate->add_option("--base", ti.base, "Base checkpoint");
  train_gate->add_option("--train", ti.train, "Training corpus");
  train_gate->add_option("--valid", ti.valid, "Validation corpus");
  train_gate->add_option("--vocab", ti.vocab, "Vocabulary file to cross-check");
  train_gate->add_option("--output", ti.output, "Gated checkpoint to write");
  train_gate->add_option("--metrics", ti.metrics, "JSON-lines metrics file to write");
  iog_flags.add_to(train_gate, true);

  EvalArgs ea;
  auto *eval = app.add_subcommand("eval", "Perplexity of a checkpoint on a corpus");
  eval->add_option("--checkpoint", ea.checkpoint);
  eval->add_option("--data", ea.data, "Corpus to score");
  eval->add_flag("--force-identity-gate", ea.force_identity_gate, "Replace the gate by ones");
  eval->add_option("--segments", ea.segments, "Independent segments (parallel with --threads)")
      ->capture_default_str();
  eval->add_option("--warmup", ea.warmup, "Tokens replayed before each later segment")
      ->capture_default_str();

  EnsembleArgs en;
  auto *ens = app.add_subcommand("ensemble-eval", "Perplexity of an averaged ensemble");
  ens->add_option("--member", en.members, "Member checkpoint (repeat)")->delimiter(',');
  ens->add_option("--gate", en.gate, "Checkpoint whose gate is shared by all members");
  ens->add_option("--data", en.data, "Corpus to score");
  ens->add_flag("--force-identity-gate", en.force_identity_gate);

  AnalyzeArgs an;
  auto *analyze = app.add_subcommand("analyze", "Top gate-weighted words per input word");
  analyze->add_option("--checkpoint", an.checkpoint, "Checkpoint with an input_only gate");
  analyze->add_option("--words", an.words, "Query words")->delimiter(',');
  analyze->add_option("--k", an.k)->capture_default_str();
  analyze->add_option("--min-freq", an.min_freq, "Minimum candidate frequency in --corpus")
      ->capture_default_str();
  analyze->add_option("--corpus", an.corpus, "Corpus the frequencies are counted on");

  CompareArgs ca;
  TrainFlags cmp_flags(TrainConfig::iog_defaults());
  auto *compare = app.add_subcommand("variant-compare", "Train and score every gate variant");
  compare->add_option("--base", ca.base, "Base checkpoint");
  compare->add_option("--train", ca.train);
  compare->add_option("--valid", ca.valid);
  compare->add_option("--test", ca.test);
  compare->add_option("--variants", ca.variants)->delimiter(',')->capture_default_str();
  compare->add_option("--output", ca.output, "JSON file to write");
  cmp_flags.add_to(compare, false);
  compare->add_option("--gate-dim", cmp_flags.tc.gate_dim)->capture_default_str();

  SynthArgs sa;
  auto *synth = app.add_subcommand("synth-corpus", "Write a class-structured synthetic corpus");
  synth->add_option("--output", sa.output, "Directory to write");
  synth->add_option("--classes", sa.spec.classes)->capture_default_str();
  synth->add_option("--words", sa.spec.words)->capture_default_str();
  synth->add_option("--noise", sa.spec.noise)->capture_default_str();
  synth->add_option("--marker-share", sa.spec.marker_share)->capture_default_str();
  synth->add_option("--zipf-exponent", sa.spec.zipf_exponent)->capture_default_str();
  synth->add_option("--train-tokens", sa.spec.train_tokens)->capture_default_str();
  synth->add_option("--valid-tokens", sa.spec.valid_tokens)->capture_default_str();
  synth->add_option("--test-tokens", sa.spec.test_tokens)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    CLI::App *active = app.get_subcommands().front();
    if (!g.config.empty()) apply_config(app, active, load_config_file(g.config), g.config);

    if (active == build) return cmd_build_vocab(bv);
    if (active == train) return cmd_train(ta, base_flags.resolve(g));
    if (active == train_gate) return cmd_train_iog(ti, iog_flags.resolve(g));
    if (active == eval) return cmd_eval(ea, g);
    if (active == ens) return cmd_ensemble_eval(en);
    if (active == analyze) return cmd_analyze(an);
    if (active == compare) return cmd_variant_compare(ca, cmp_flags.resolve(g));
    if (active == synth) return cmd_synth(sa, g);
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
