// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ioglm {

/// Hidden-class bigram process. Every word belongs to one of `classes`
/// classes and has a planted successor class; each class has one marker word
/// ("m<c>") whose successor class is fixed. The next word is drawn from the
/// current word's successor class with probability 1 - noise (uniformly from
/// the whole vocabulary otherwise). Inside the successor class the marker is
/// picked with probability marker_share, the remaining words by a Zipf law
/// over a permutation private to the current word, which gives the bigram
/// table far more rank than a small recurrent state can hold.
struct SyntheticSpec {
  std::size_t classes = 8;
  std::size_t words = 400;
  double noise = 0.1;
  double marker_noise = 0.0;
  double marker_share = 0.15;
  double zipf_exponent = 1.0;
  std::size_t line_length = 40;
  std::size_t train_tokens = 40000;
  std::size_t valid_tokens = 6000;
  std::size_t test_tokens = 6000;
  std::uint64_t seed = 7;
};

struct SyntheticCorpus {
  std::vector<std::string> words;          // index = word id
  std::vector<std::size_t> word_class;     // class of each word
  std::vector<std::size_t> successor;      // planted successor class per word
  std::vector<std::string> markers;        // marker word of each class
  std::vector<std::string> train, valid, test; // one sentence per line

  /// Words of class `c`.
  std::vector<std::string> class_members(std::size_t c) const;
  std::size_t class_of(const std::string &word) const;
};

SyntheticCorpus generate_synthetic(const SyntheticSpec &spec);

/// Writes train.txt, valid.txt, test.txt and classes.tsv
/// (word<TAB>class<TAB>successor) into `dir`.
void write_synthetic(const SyntheticCorpus &corpus, const std::filesystem::path &dir);

} // namespace ioglm
