#pragma once

#include <filesystem>
#include <istream>
#include <string_view>

#include <nlohmann/json.hpp>

namespace vipcop::cli {

// Reads the subset of TOML that experiment configs use: [tables] and
// [dotted.tables], bare/quoted/dotted keys, basic and literal strings,
// integers, floats, booleans, arrays (may span lines) and inline tables.
// Errors throw ConfigError with the line number.
nlohmann::json parse_toml(std::string_view text);
nlohmann::json load_toml(const std::filesystem::path& path);

}  // namespace vipcop::cli
