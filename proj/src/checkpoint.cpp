// SPDX-License-Identifier: Apache-2.0
#include "ioglm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

namespace ioglm {

namespace {

constexpr char kMagic[5] = {'I', 'O', 'G', 'L', 'M'};

std::uint64_t fnv1a(const std::uint8_t *data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

class Writer {
public:
  void bytes(const void *p, std::size_t n) {
    const auto *b = static_cast<const std::uint8_t *>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void str(const std::string &s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void f32(float f) { u32(std::bit_cast<std::uint32_t>(f)); }
  std::vector<std::uint8_t> &buffer() { return out_; }

private:
  std::vector<std::uint8_t> out_;
};

class Reader {
public:
  Reader(const std::uint8_t *data, std::size_t n) : data_(data), n_(n) {}
  void need(std::size_t k) {
    if (n_ - pos_ < k) throw CheckpointError("checkpoint truncated");
  }
  std::uint8_t u8() {
    need(1);
    return data_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_++]) << (8 * i);
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char *>(data_ + pos_), n);
    pos_ += n;
    return s;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  bool done() const { return pos_ == n_; }

private:
  const std::uint8_t *data_;
  std::size_t n_;
  std::size_t pos_ = 0;
};

bool is_arch_key(const std::string &k) {
  return k.rfind("model.", 0) == 0 || k.rfind("gate.", 0) == 0;
}

ConfigEcho arch_echo(const Checkpoint &c) {
  const auto &m = c.model.config;
  ConfigEcho e = {
      {"model.vocab_size", std::to_string(m.vocab_size)},
      {"model.embed_dim", std::to_string(m.embed_dim)},
      {"model.hidden_dim", std::to_string(m.hidden_dim)},
      {"model.layers", std::to_string(m.layers)},
      {"model.cell", to_string(m.cell)},
      {"model.tie_weights", m.tie_weights ? "1" : "0"},
  };
  if (c.gate) {
    const auto &g = c.gate->config;
    e.emplace_back("gate.variant", to_string(g.variant));
    e.emplace_back("gate.dim", std::to_string(g.gate_dim));
    e.emplace_back("gate.context_dim", std::to_string(g.context_dim));
  }
  return e;
}

template <typename Refs>
void write_arrays(Writer &w, const Refs &refs) {
  for (const auto &t : refs) {
    w.str(t.name);
    w.u32(static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) w.u64(d);
    for (float x : t.values) w.f32(x);
  }
}

std::size_t to_size(const std::map<std::string, std::string> &kv, const std::string &key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw CheckpointError("checkpoint config lacks '" + key + "'");
  try {
    return static_cast<std::size_t>(std::stoull(it->second));
  } catch (const std::exception &) {
    throw CheckpointError("checkpoint config '" + key + "' is not a count");
  }
}

const std::string &value(const std::map<std::string, std::string> &kv,
                         const std::string &key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw CheckpointError("checkpoint config lacks '" + key + "'");
  return it->second;
}

void read_into(Reader &r, TensorRef<float> &&dst) {
  const std::string name = r.str();
  if (name != dst.name)
    throw CheckpointError("checkpoint array '" + name + "' where '" + dst.name +
                          "' was expected");
  const std::uint32_t ndim = r.u32();
  if (ndim != dst.shape.size())
    throw CheckpointError("checkpoint array '" + name + "' has wrong rank");
  for (std::uint32_t d = 0; d < ndim; ++d)
    if (r.u64() != dst.shape[d])
      throw CheckpointError("checkpoint array '" + name + "' has wrong shape");
  for (auto &x : dst.values) x = r.f32();
}

} // namespace

std::optional<std::string> Checkpoint::config_value(const std::string &key) const {
  for (const auto &[k, v] : config)
    if (k == key) return v;
  return std::nullopt;
}

std::vector<std::uint8_t> serialize(const Checkpoint &ckpt) {
  if (ckpt.vocab.size() != ckpt.model.config.vocab_size)
    throw CheckpointError("checkpoint vocabulary (" + std::to_string(ckpt.vocab.size()) +
                          ") does not match model vocabulary size (" +
                          std::to_string(ckpt.model.config.vocab_size) + ")");
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kCheckpointVersion);

  ConfigEcho echo = arch_echo(ckpt);
  for (const auto &kv : ckpt.config)
    if (!is_arch_key(kv.first)) echo.push_back(kv);
  w.u32(static_cast<std::uint32_t>(echo.size()));
  for (const auto &[k, v] : echo) {
    w.str(k);
    w.str(v);
  }

  w.u32(static_cast<std::uint32_t>(ckpt.vocab.size()));
  for (const auto &word : ckpt.vocab.words()) w.str(word);

  w.u8(ckpt.gate ? 1 : 0);
  const auto model_arrays = ckpt.model.tensors();
  std::size_t n = model_arrays.size();
  if (ckpt.gate) n += ckpt.gate->tensors().size();
  w.u32(static_cast<std::uint32_t>(n));
  write_arrays(w, model_arrays);
  if (ckpt.gate) write_arrays(w, ckpt.gate->tensors());

  auto &buf = w.buffer();
  const std::uint64_t sum = fnv1a(buf.data(), buf.size());
  w.u64(sum);
  return std::move(buf);
}

Checkpoint deserialize(const std::vector<std::uint8_t> &bytes) {
  if (bytes.size() < sizeof kMagic + 4 + 8)
    throw CheckpointError("checkpoint too short");
  const std::size_t body = bytes.size() - 8;
  {
    Reader tail(bytes.data() + body, 8);
    if (tail.u64() != fnv1a(bytes.data(), body))
      throw CheckpointError("checkpoint checksum mismatch (file corrupted)");
  }
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw CheckpointError("not an IOGLM checkpoint (bad magic)");

  Reader r(bytes.data() + sizeof kMagic, body - sizeof kMagic);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));

  Checkpoint c;
  std::map<std::string, std::string> kv;
  const std::uint32_t n_cfg = r.u32();
  for (std::uint32_t i = 0; i < n_cfg; ++i) {
    std::string k = r.str();
    std::string v = r.str();
    kv[k] = v;
    c.config.emplace_back(std::move(k), std::move(v));
  }

  const std::uint32_t V = r.u32();
  std::vector<std::string> words;
  words.reserve(V);
  for (std::uint32_t i = 0; i < V; ++i) words.push_back(r.str());
  c.vocab = Vocabulary::from_words(std::move(words));
  if (c.vocab.size() != V)
    throw CheckpointError("checkpoint vocabulary lacks reserved tokens");

  LMConfig mc;
  mc.vocab_size = to_size(kv, "model.vocab_size");
  mc.embed_dim = to_size(kv, "model.embed_dim");
  mc.hidden_dim = to_size(kv, "model.hidden_dim");
  mc.layers = to_size(kv, "model.layers");
  try {
    mc.cell = parse_cell_kind(value(kv, "model.cell"));
    mc.tie_weights = value(kv, "model.tie_weights") == "1";
    c.model = LMParams<float>::zeros(mc);
  } catch (const std::invalid_argument &e) {
    throw CheckpointError(std::string("checkpoint model config: ") + e.what());
  }
  if (mc.vocab_size != V)
    throw CheckpointError("checkpoint vocabulary size disagrees with model config");

  const bool has_gate = r.u8() != 0;
  if (has_gate) {
    GateConfig gc;
    gc.vocab_size = V;
    gc.gate_dim = to_size(kv, "gate.dim");
    gc.context_dim = to_size(kv, "gate.context_dim");
    try {
      gc.variant = parse_gate_variant(value(kv, "gate.variant"));
      c.gate = IOGParams<float>::zeros(gc);
    } catch (const std::invalid_argument &e) {
      throw CheckpointError(std::string("checkpoint gate config: ") + e.what());
    }
  }

  auto model_arrays = c.model.tensors();
  std::size_t expected = model_arrays.size();
  std::vector<TensorRef<float>> gate_arrays;
  if (c.gate) {
    gate_arrays = c.gate->tensors();
    expected += gate_arrays.size();
  }
  if (r.u32() != expected) throw CheckpointError("checkpoint array count mismatch");
  for (auto &t : model_arrays) read_into(r, std::move(t));
  for (auto &t : gate_arrays) read_into(r, std::move(t));
  if (!r.done()) throw CheckpointError("trailing bytes in checkpoint");
  return c;
}

void save_checkpoint(const Checkpoint &ckpt, const std::filesystem::path &path) {
  const auto bytes = serialize(ckpt);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char *>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw CheckpointError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

} // namespace ioglm
