#pragma once

// Small helpers shared by the line-oriented file formats.

#include <charconv>
#include <cstdint>
#include <istream>
#include <map>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "pufsec/error.hpp"

namespace pufsec::text {

/// 17 significant digits: round-trips every double.
inline std::string format_real(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, end);
}

/// Fixed-point with `decimals` digits after the point.
inline std::string format_fixed(double v, int decimals) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, decimals);
  return std::string(buf, end);
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) return out;
    start = pos + 1;
  }
}

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

template <typename T>
T parse_or_throw(std::string_view s, std::size_t line, std::string_view what) {
  T v{};
  if (!parse_number(s, v))
    throw ParseError(line, "invalid " + std::string(what) + " '" + std::string(s) + "'");
  return v;
}

/// Parses "key=value" tokens after the first `skip` tokens of a header line.
inline std::map<std::string, std::string, std::less<>> header_fields(
    const std::vector<std::string_view>& tokens, std::size_t skip, std::size_t line) {
  std::map<std::string, std::string, std::less<>> out;
  for (std::size_t i = skip; i < tokens.size(); ++i) {
    const auto eq = tokens[i].find('=');
    if (eq == std::string_view::npos || eq == 0)
      throw ParseError(line, "expected key=value, got '" + std::string(tokens[i]) + "'");
    out.emplace(std::string(tokens[i].substr(0, eq)), std::string(tokens[i].substr(eq + 1)));
  }
  return out;
}

inline const std::string& require_field(const std::map<std::string, std::string, std::less<>>& f,
                                        std::string_view key, std::size_t line) {
  auto it = f.find(key);
  if (it == f.end()) throw ParseError(line, "header is missing '" + std::string(key) + "'");
  return it->second;
}

/// Reads all LF-terminated lines; a trailing '\r' is kept so formats can reject it.
inline std::vector<std::string> read_lines(std::istream& in) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

/// 64-bit FNV-1a over bytes, printed as 16 hex digits.
inline std::string checksum_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) s[static_cast<std::size_t>(i)] = digits[h & 0xF];
  return s;
}

}  // namespace pufsec::text
