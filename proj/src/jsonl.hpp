#pragma once

// Private helpers for the JSON Lines formats.

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>

#include <json.hpp>

#include "hyex/error.hpp"

namespace hyex::detail {

using json = nlohmann::json;

std::ifstream open_input(const std::filesystem::path& path);
std::ofstream open_output(const std::filesystem::path& path, bool append = false);

/// Calls `fn(object, line_number)` for each non-blank line. Lines that are not
/// JSON objects raise ParseError naming the file and 1-based line.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const json&, std::size_t)>& fn);

/// Field access that reports the line number on a missing or mistyped key.
template <typename T>
T field(const json& obj, const char* key, const std::filesystem::path& path, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw Error(ErrorCode::ParseError,
                path.string() + ":" + std::to_string(line) + ": missing field '" + key + "'");
  }
  try {
    return it->template get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError,
                path.string() + ":" + std::to_string(line) + ": field '" + key + "': " + e.what());
  }
}

}  // namespace hyex::detail
