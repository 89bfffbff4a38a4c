// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ioglm {

using WordIndex = std::uint32_t;

inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr std::string_view kEosToken = "<eos>";

/// Bijective word <-> index map. `<unk>` and `<eos>` are always present.
class Vocabulary {
public:
  Vocabulary() = default;

  /// Builds from an explicit index-ordered word list (e.g. a vocab file).
  /// Reserved tokens are appended if missing.
  static Vocabulary from_words(std::vector<std::string> words);

  std::size_t size() const { return words_.size(); }
  WordIndex unk_index() const { return unk_; }
  WordIndex eos_index() const { return eos_; }

  bool contains(std::string_view word) const;
  /// Index of `word`, or unk_index() when absent.
  WordIndex index_of(std::string_view word) const;
  const std::string &word(WordIndex index) const;
  const std::vector<std::string> &words() const { return words_; }

  void save(const std::filesystem::path &path) const;
  static Vocabulary load(const std::filesystem::path &path);

  friend bool operator==(const Vocabulary &a, const Vocabulary &b) {
    return a.words_ == b.words_;
  }

private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, WordIndex> index_;
  WordIndex unk_ = 0;
  WordIndex eos_ = 0;
};

/// Encoded corpus: every entry < V of the vocabulary it was encoded with.
struct TokenStream {
  std::vector<WordIndex> tokens;
  std::size_t size() const { return tokens.size(); }
};

/// Frequency-ordered vocabulary: words with count >= min_count sorted by
/// descending count (ties lexicographic), then `<unk>`, `<eos>`.
Vocabulary build_vocab(std::istream &text, std::size_t min_count = 1);
Vocabulary build_vocab_from_file(const std::filesystem::path &path,
                                 std::size_t min_count = 1);

TokenStream encode(std::istream &text, const Vocabulary &vocab,
                   bool append_eos = true);
TokenStream encode_file(const std::filesystem::path &path,
                        const Vocabulary &vocab, bool append_eos = true);
std::string decode(const TokenStream &stream, const Vocabulary &vocab);

/// Occurrence count of every vocabulary entry in `stream`.
std::vector<std::size_t> frequency_table(const TokenStream &stream,
                                         std::size_t vocab_size);

/// One B x L block: inputs[b][j] predicts targets[b][j] = inputs[b][j+1]
/// within lane b.
struct Batch {
  std::vector<std::vector<WordIndex>> inputs;
  std::vector<std::vector<WordIndex>> targets;
};

/// Stream reshaped into B contiguous lanes; yields full L-length blocks.
/// Hidden state is meant to carry over between consecutive blocks.
class BatchIterator {
public:
  BatchIterator(const TokenStream &stream, std::size_t batch_size,
                std::size_t bptt_length);

  std::size_t batch_size() const { return lanes_.size(); }
  std::size_t bptt_length() const { return bptt_; }
  std::size_t block_count() const { return blocks_; }
  std::size_t lane_length() const { return lane_length_; }
  Batch block(std::size_t k) const;

private:
  std::vector<std::vector<WordIndex>> lanes_;
  std::size_t bptt_;
  std::size_t lane_length_;
  std::size_t blocks_;
};

BatchIterator batchify(const TokenStream &stream, std::size_t batch_size,
                       std::size_t bptt_length);

} // namespace ioglm
