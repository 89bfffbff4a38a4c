// SPDX-License-Identifier: Apache-2.0
#pragma once

// Binary checkpoint layout (all integers little-endian):
//
//   "IOGLM" u32 version
//   u32 n_config, n_config x (str key, str value)      config echo
//   u32 V, V x str                                     vocabulary
//   u8 has_gate
//   u32 n_arrays, n_arrays x array                     model, then gate
//   u64 FNV-1a of every preceding byte
//
//   str   = u32 length + bytes
//   array = str name, u32 ndim, ndim x u64 extent, f32 data[prod(extent)]
//
// Architecture fields (cell, dims, gate variant...) travel in the config echo
// under "model." and "gate." keys.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ioglm/corpus.hpp"
#include "ioglm/gate.hpp"
#include "ioglm/model.hpp"

namespace ioglm {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using ConfigEcho = std::vector<std::pair<std::string, std::string>>;

struct Checkpoint {
  ConfigEcho config;
  Vocabulary vocab;
  LMParams<float> model;
  std::optional<IOGParams<float>> gate;

  /// Value for `key` in the config echo, if present.
  std::optional<std::string> config_value(const std::string &key) const;
};

std::vector<std::uint8_t> serialize(const Checkpoint &ckpt);
Checkpoint deserialize(const std::vector<std::uint8_t> &bytes);

/// Writes to a temporary sibling and renames it into place.
void save_checkpoint(const Checkpoint &ckpt, const std::filesystem::path &path);
Checkpoint load_checkpoint(const std::filesystem::path &path);

} // namespace ioglm
