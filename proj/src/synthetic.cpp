// SPDX-License-Identifier: Apache-2.0
#include "ioglm/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "ioglm/random.hpp"

namespace ioglm {

namespace {

std::size_t sample_cdf(const std::vector<double> &cdf, Rng &rng) {
  const double u = rng.uniform() * cdf.back();
  return static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
}

std::vector<std::string> sample_lines(const SyntheticCorpus &c, const SyntheticSpec &spec,
                                      std::size_t tokens, Rng &rng,
                                      const std::vector<std::vector<std::size_t>> &members,
                                      const std::vector<std::vector<std::size_t>> &prefs,
                                      const std::vector<double> &zipf_cdf) {
  const std::size_t W = c.words.size();
  auto draw_from_class = [&](std::size_t word, std::size_t cls) {
    if (rng.uniform() < spec.marker_share) return members[cls][0];
    const auto &order = prefs[word];
    return order[sample_cdf(zipf_cdf, rng)];
  };

  std::vector<std::string> lines;
  std::size_t produced = 0;
  std::size_t current = rng.below(W);
  while (produced < tokens) {
    const std::size_t len = std::min(spec.line_length, tokens - produced);
    std::string line;
    for (std::size_t i = 0; i < len; ++i) {
      if (i) line += ' ';
      line += c.words[current];
      const bool marker = members[c.word_class[current]][0] == current;
      const double noise = marker ? spec.marker_noise : spec.noise;
      if (rng.uniform() < noise)
        current = rng.below(W);
      else
        current = draw_from_class(current, c.successor[current]);
    }
    produced += len;
    lines.push_back(std::move(line));
  }
  return lines;
}

} // namespace

std::vector<std::string> SyntheticCorpus::class_members(std::size_t c) const {
  std::vector<std::string> out;
  for (std::size_t w = 0; w < words.size(); ++w)
    if (word_class[w] == c) out.push_back(words[w]);
  return out;
}

std::size_t SyntheticCorpus::class_of(const std::string &word) const {
  const auto it = std::find(words.begin(), words.end(), word);
  if (it == words.end()) throw std::out_of_range("synthetic: unknown word '" + word + "'");
  return word_class[static_cast<std::size_t>(it - words.begin())];
}

SyntheticCorpus generate_synthetic(const SyntheticSpec &spec) {
  if (spec.classes < 2 || spec.words < 2 * spec.classes)
    throw std::invalid_argument("synthetic: need >= 2 classes and >= 2 words per class");
  if (spec.words % spec.classes != 0)
    throw std::invalid_argument("synthetic: words must be a multiple of classes");
  if (spec.line_length == 0) throw std::invalid_argument("synthetic: line_length must be > 0");

  Rng rng(spec.seed);
  const std::size_t per_class = spec.words / spec.classes;
  SyntheticCorpus c;
  std::vector<std::vector<std::size_t>> members(spec.classes);
  for (std::size_t k = 0; k < spec.classes; ++k) {
    for (std::size_t i = 0; i < per_class; ++i) {
      const std::size_t id = c.words.size();
      c.words.push_back(i == 0 ? "m" + std::to_string(k)
                               : "w" + std::to_string(k) + "_" + std::to_string(i));
      c.word_class.push_back(k);
      members[k].push_back(id);
    }
    c.markers.push_back(c.words[members[k][0]]);
  }

  // Markers map class k to class k+3 (mod classes); everything else is random.
  c.successor.resize(c.words.size());
  for (std::size_t w = 0; w < c.words.size(); ++w) {
    const std::size_t k = c.word_class[w];
    c.successor[w] = members[k][0] == w ? (k + 3) % spec.classes : rng.below(spec.classes);
  }

  // Per-word preference order over the non-marker members of its successor class.
  std::vector<std::vector<std::size_t>> prefs(c.words.size());
  for (std::size_t w = 0; w < c.words.size(); ++w) {
    const auto &m = members[c.successor[w]];
    std::vector<std::size_t> order(m.begin() + 1, m.end());
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    prefs[w] = std::move(order);
  }
  std::vector<double> zipf_cdf;
  double acc = 0.0;
  for (std::size_t r = 1; r < per_class; ++r) {
    acc += 1.0 / std::pow(static_cast<double>(r), spec.zipf_exponent);
    zipf_cdf.push_back(acc);
  }

  c.train = sample_lines(c, spec, spec.train_tokens, rng, members, prefs, zipf_cdf);
  c.valid = sample_lines(c, spec, spec.valid_tokens, rng, members, prefs, zipf_cdf);
  c.test = sample_lines(c, spec, spec.test_tokens, rng, members, prefs, zipf_cdf);
  return c;
}

void write_synthetic(const SyntheticCorpus &corpus, const std::filesystem::path &dir) {
  std::filesystem::create_directories(dir);
  auto dump = [&](const std::string &name, const std::vector<std::string> &lines) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    for (const auto &l : lines) out << l << '\n';
  };
  dump("train.txt", corpus.train);
  dump("valid.txt", corpus.valid);
  dump("test.txt", corpus.test);
  std::ofstream out(dir / "classes.tsv", std::ios::binary);
  for (std::size_t w = 0; w < corpus.words.size(); ++w)
    out << corpus.words[w] << '\t' << corpus.word_class[w] << '\t' << corpus.successor[w]
        << '\n';
}

} // namespace ioglm
