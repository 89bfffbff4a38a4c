// SPDX-License-Identifier: Apache-2.0
#include "ioglm/config.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

namespace ioglm {

namespace {
std::string trim(const std::string &s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}
} // namespace

KeyValues parse_config(std::istream &in, const std::string &source) {
  KeyValues kv;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(source + ":" + std::to_string(lineno) +
                                  ": expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::invalid_argument(source + ":" + std::to_string(lineno) + ": empty key");
    auto it = std::find_if(kv.begin(), kv.end(), [&](const auto &p) { return p.first == key; });
    if (it != kv.end())
      it->second = std::move(value);
    else
      kv.emplace_back(std::move(key), std::move(value));
  }
  return kv;
}

KeyValues load_config_file(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  return parse_config(in, path.string());
}

} // namespace ioglm
