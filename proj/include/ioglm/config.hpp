// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <istream>
#include <string>
#include <utility>
#include <vector>

namespace ioglm {

/// Flat `key = value` configuration. Blank lines and `#` comments are
/// ignored; keys keep file order; a repeated key keeps its last value.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

KeyValues parse_config(std::istream &in, const std::string &source = "<config>");
KeyValues load_config_file(const std::filesystem::path &path);

} // namespace ioglm
