// SPDX-License-Identifier: Apache-2.0
#include "ioglm/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace ioglm {

namespace {

template <typename F>
void for_each_line_tokens(std::istream &in, F &&on_line) {
  std::string line;
  std::vector<std::string_view> tokens;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.clear();
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
      const std::size_t start = i;
      while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
      if (i > start) tokens.emplace_back(line.data() + start, i - start);
    }
    on_line(tokens);
  }
}

std::ifstream open_or_throw(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

bool is_reserved(std::string_view w) { return w == kUnkToken || w == kEosToken; }

} // namespace

Vocabulary Vocabulary::from_words(std::vector<std::string> words) {
  Vocabulary v;
  if (std::find(words.begin(), words.end(), kUnkToken) == words.end())
    words.emplace_back(kUnkToken);
  if (std::find(words.begin(), words.end(), kEosToken) == words.end())
    words.emplace_back(kEosToken);
  v.words_ = std::move(words);
  for (std::size_t i = 0; i < v.words_.size(); ++i) {
    auto [it, inserted] =
        v.index_.emplace(v.words_[i], static_cast<WordIndex>(i));
    if (!inserted)
      throw std::invalid_argument("vocabulary: duplicate word '" + v.words_[i] +
                                  "'");
  }
  v.unk_ = v.index_.at(std::string(kUnkToken));
  v.eos_ = v.index_.at(std::string(kEosToken));
  return v;
}

bool Vocabulary::contains(std::string_view word) const {
  return index_.find(std::string(word)) != index_.end();
}

WordIndex Vocabulary::index_of(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? unk_ : it->second;
}

const std::string &Vocabulary::word(WordIndex index) const {
  if (index >= words_.size())
    throw std::out_of_range("vocabulary: index " + std::to_string(index) +
                            " out of range (V=" + std::to_string(size()) + ")");
  return words_[index];
}

void Vocabulary::save(const std::filesystem::path &path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto &w : words_) out << w << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path &path) {
  auto in = open_or_throw(path);
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    words.push_back(line);
  }
  return from_words(std::move(words));
}

Vocabulary build_vocab(std::istream &text, std::size_t min_count) {
  std::map<std::string, std::size_t, std::less<>> counts;
  std::size_t total = 0;
  for_each_line_tokens(text, [&](const std::vector<std::string_view> &tokens) {
    for (auto t : tokens) {
      ++total;
      if (is_reserved(t)) continue;
      auto it = counts.find(t);
      if (it == counts.end())
        counts.emplace(std::string(t), 1);
      else
        ++it->second;
    }
  });
  if (total == 0) throw std::invalid_argument("build_vocab: empty training text");

  std::vector<std::pair<std::string, std::size_t>> entries;
  for (auto &[w, c] : counts)
    if (c >= min_count) entries.emplace_back(w, c);
  // std::map iteration is already lexicographic, so a stable sort on count
  // leaves ties in lexicographic order.
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto &a, const auto &b) { return a.second > b.second; });

  std::vector<std::string> words;
  words.reserve(entries.size() + 2);
  for (auto &e : entries) words.push_back(std::move(e.first));
  return Vocabulary::from_words(std::move(words));
}

Vocabulary build_vocab_from_file(const std::filesystem::path &path,
                                 std::size_t min_count) {
  auto in = open_or_throw(path);
  return build_vocab(in, min_count);
}

TokenStream encode(std::istream &text, const Vocabulary &vocab, bool append_eos) {
  TokenStream stream;
  for_each_line_tokens(text, [&](const std::vector<std::string_view> &tokens) {
    for (auto t : tokens) stream.tokens.push_back(vocab.index_of(t));
    if (append_eos) stream.tokens.push_back(vocab.eos_index());
  });
  return stream;
}

TokenStream encode_file(const std::filesystem::path &path,
                        const Vocabulary &vocab, bool append_eos) {
  auto in = open_or_throw(path);
  return encode(in, vocab, append_eos);
}

std::string decode(const TokenStream &stream, const Vocabulary &vocab) {
  std::string out;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const WordIndex w = stream.tokens[i];
    if (w == vocab.eos_index()) {
      out += '\n';
      continue;
    }
    if (!out.empty() && out.back() != '\n') out += ' ';
    out += vocab.word(w);
  }
  return out;
}

std::vector<std::size_t> frequency_table(const TokenStream &stream,
                                         std::size_t vocab_size) {
  std::vector<std::size_t> freq(vocab_size, 0);
  for (WordIndex w : stream.tokens) {
    if (w >= vocab_size)
      throw std::out_of_range("frequency_table: token index out of range");
    ++freq[w];
  }
  return freq;
}

BatchIterator::BatchIterator(const TokenStream &stream, std::size_t batch_size,
                             std::size_t bptt_length)
    : bptt_(bptt_length) {
  if (batch_size == 0 || bptt_length == 0)
    throw std::invalid_argument("batchify: batch size and bptt length must be positive");
  if (stream.size() < 2 * batch_size)
    throw std::invalid_argument("batchify: stream of " +
                                std::to_string(stream.size()) +
                                " tokens too short for batch size " +
                                std::to_string(batch_size));
  lane_length_ = stream.size() / batch_size;
  lanes_.resize(batch_size);
  for (std::size_t b = 0; b < batch_size; ++b) {
    auto first = stream.tokens.begin() + static_cast<std::ptrdiff_t>(b * lane_length_);
    lanes_[b].assign(first, first + static_cast<std::ptrdiff_t>(lane_length_));
  }
  blocks_ = (lane_length_ - 1) / bptt_;
}

Batch BatchIterator::block(std::size_t k) const {
  if (k >= blocks_)
    throw std::out_of_range("batch block " + std::to_string(k) + " out of range");
  Batch batch;
  batch.inputs.resize(lanes_.size());
  batch.targets.resize(lanes_.size());
  const std::size_t start = k * bptt_;
  for (std::size_t b = 0; b < lanes_.size(); ++b) {
    const auto &lane = lanes_[b];
    batch.inputs[b].assign(lane.begin() + static_cast<std::ptrdiff_t>(start),
                           lane.begin() + static_cast<std::ptrdiff_t>(start + bptt_));
    batch.targets[b].assign(lane.begin() + static_cast<std::ptrdiff_t>(start + 1),
                            lane.begin() + static_cast<std::ptrdiff_t>(start + bptt_ + 1));
  }
  return batch;
}

BatchIterator batchify(const TokenStream &stream, std::size_t batch_size,
                       std::size_t bptt_length) {
  return BatchIterator(stream, batch_size, bptt_length);
}

} // namespace ioglm
