#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "inopca/errors.hpp"

namespace inopca {

/// Splits `name:arg` into its head and optional argument.
inline std::pair<std::string_view, std::optional<std::string_view>> split_spec(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) return {text, std::nullopt};
  return {text.substr(0, colon), text.substr(colon + 1)};
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r' || s.front() == '\n'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n'))
    s.remove_suffix(1);
  return s;
}

/// Strict full-string parse of a finite double; returns nullopt on any trailing garbage.
inline std::optional<double> try_parse_number(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value)) return std::nullopt;
  return value;
}

inline double parse_number(std::string_view text, std::string_view what) {
  if (auto v = try_parse_number(text)) return *v;
  throw ConfigError("invalid " + std::string(what) + ": '" + std::string(text) + "'");
}

/// Shortest round-trip representation, e.g. 0.5 -> "0.5", 2 -> "2".
inline std::string format_number(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return ec == std::errc{} ? std::string(buf, ptr) : std::string("nan");
}

/// Fixed 6-decimal rendering with trailing zeros trimmed, keeping at least one
/// decimal: 2.0 -> "2.0", 0.8819171 -> "0.881917".
inline std::string format_fixed6(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", value);
  std::string s(buf);
  const auto dot = s.find('.');
  if (dot == std::string::npos) return s;
  while (s.size() > dot + 2 && s.back() == '0') s.pop_back();
  return s;
}

/// Parses an inclusive range `start:stop:step` into its grid points.
inline std::vector<double> parse_grid(std::string_view text) {
  std::vector<std::string_view> parts;
  std::size_t pos = 0;
  while (true) {
    const auto colon = text.find(':', pos);
    parts.push_back(text.substr(pos, colon == std::string_view::npos ? std::string_view::npos : colon - pos));
    if (colon == std::string_view::npos) break;
    pos = colon + 1;
  }
  if (parts.size() != 3) throw ConfigError("grid must be start:stop:step, got '" + std::string(text) + "'");
  const double start = parse_number(parts[0], "grid start");
  const double stop = parse_number(parts[1], "grid stop");
  const double step = parse_number(parts[2], "grid step");
  if (!(step > 0.0) || stop < start) throw ConfigError("grid needs step > 0 and stop >= start: '" + std::string(text) + "'");
  std::vector<double> grid;
  const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
  for (std::size_t i = 0; i < count; ++i) {
    // round away accumulation noise so 0:1:0.05 yields 0.15, not 0.15000000000000002
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", start + static_cast<double>(i) * step);
    grid.push_back(std::strtod(buf, nullptr));
  }
  return grid;
}

/// Parses a comma-separated list of numbers.
inline std::vector<double> parse_list(std::string_view text, std::string_view what) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const auto item = text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
    out.push_back(parse_number(item, what));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

} // namespace inopca
