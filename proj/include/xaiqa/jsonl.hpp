#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "xaiqa/error.hpp"

namespace xaiqa {

// Insertion-ordered JSON keeps emitted records in the documented field order.
using Json = nlohmann::ordered_json;

// Calls `fn(record, line_number)` for each non-blank line. Parse failures are
// reported as input errors carrying the file name and 1-based line number.
inline void read_jsonl(const std::filesystem::path& path,
                       const std::function<void(const Json&, std::size_t)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    Json record;
    try {
      record = Json::parse(line);
    } catch (const Json::exception& e) {
      fail(ErrorKind::input, path.string() + ":" + std::to_string(line_no) +
                                 ": malformed JSON: " + e.what());
    }
    if (!record.is_object()) {
      fail(ErrorKind::input, path.string() + ":" + std::to_string(line_no) +
                                 ": expected a JSON object");
    }
    try {
      fn(record, line_no);
    } catch (const Json::exception& e) {
      fail(ErrorKind::input, path.string() + ":" + std::to_string(line_no) +
                                 ": malformed record: " + e.what());
    }
  }
}

inline void ensure_parent(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
}

inline void write_text(const std::filesystem::path& path, const std::string& content) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot write " + path.string());
  out << content;
  if (!out) fail(ErrorKind::io, "write failed for " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline std::string to_jsonl(const std::vector<Json>& records) {
  std::string out;
  for (const auto& r : records) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

inline void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& records) {
  write_text(path, to_jsonl(records));
}

// Field accessors that turn schema violations into readable messages.
template <typename T>
T required(const Json& record, const char* key) {
  const auto it = record.find(key);
  if (it == record.end()) fail(ErrorKind::input, std::string("missing field \"") + key + "\"");
  try {
    return it->get<T>();
  } catch (const Json::exception&) {
    fail(ErrorKind::input, std::string("field \"") + key + "\" has the wrong type");
  }
}

}  // namespace xaiqa
