#pragma once

#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "linked/core/errors.hpp"
#include "linked/core/serialization.hpp"

namespace linked {

namespace fs = std::filesystem;

// Writes `content` to a sibling temp file and renames it over `path`, so a
// reader never observes a partially written file.
void write_file_atomic(const fs::path& path, const std::string& content);

std::string read_file(const fs::path& path);

// Calls `fn(line_number, line)` for every non-blank line, 1-based numbering.
template <typename Fn>
void for_each_jsonl_line(const fs::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    fn(number, line);
  }
}

template <typename T>
std::string to_jsonl(std::span<const T> records) {
  std::string out;
  for (const auto& r : records) {
    out += Json(r).dump();
    out += '\n';
  }
  return out;
}

// One JSON object per line, written atomically.
template <typename T>
void persist_stage(std::span<const T> records, const fs::path& path) {
  std::string content;
  try {
    content = to_jsonl(records);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("serialization failed: ") + e.what());
  }
  write_file_atomic(path, content);
}

template <typename T>
void persist_stage(const std::vector<T>& records, const fs::path& path) {
  persist_stage(std::span<const T>(records), path);
}

template <typename T>
std::vector<T> load_stage(const fs::path& path) {
  std::vector<T> out;
  for_each_jsonl_line(path, [&](std::size_t number, const std::string& line) {
    try {
      out.push_back(Json::parse(line).get<T>());
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(number, path.string() + ": " + e.what());
    } catch (const DataError& e) {
      throw ParseError(number, path.string() + ": " + e.what());
    }
  });
  return out;
}

}  // namespace linked
