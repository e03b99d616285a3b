#pragma once

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sead/error.hpp"

namespace sead::kv {

// Plain "key = value" text: one entry per line, '#' starts a comment,
// blank lines ignored. Shared by the run config and the effect table.

struct Entry {
  std::string key;
  std::string value;
  int line = 0;
};

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::vector<Entry> parse(std::string_view text) {
  std::vector<Entry> out;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected 'key = value'", line_no);
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError("empty key", line_no);
    for (const Entry& e : out)
      if (e.key == key) throw ParseError("duplicate key '" + std::string(key) + "'", line_no);
    out.push_back({std::string(key), std::string(value), line_no});
  }
  return out;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename T>
T to_number(const Entry& e) {
  T value{};
  const char* begin = e.value.data();
  const char* end = begin + e.value.size();
  auto [p, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || p != end)
    throw ParseError("bad numeric value '" + e.value + "' for " + e.key, e.line);
  return value;
}

inline bool to_bool(const Entry& e) {
  if (e.value == "true" || e.value == "1") return true;
  if (e.value == "false" || e.value == "0") return false;
  throw ParseError("bad boolean value '" + e.value + "' for " + e.key, e.line);
}

}  // namespace sead::kv
