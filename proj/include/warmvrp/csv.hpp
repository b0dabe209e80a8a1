#pragma once

#include <charconv>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "warmvrp/core.hpp"

namespace warmvrp::csv {

/// Shortest decimal text that round-trips to the same double.
inline std::string format_double(double value) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof buffer, value);
  return std::string(buffer, result.ptr);
}

inline std::string format_optional(const std::optional<double>& value) {
  return value ? format_double(*value) : std::string("NA");
}

inline std::vector<std::string> split_line(std::string_view line, char sep = ',') {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    fields.emplace_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  if (!fields.empty() && !fields.back().empty() && fields.back().back() == '\r')
    fields.back().pop_back();
  return fields;
}

inline double parse_double(std::string_view text) {
  double value = 0.0;
  const auto result = std::from_chars(text.data(), text.data() + text.size(), value);
  if (result.ec != std::errc() || result.ptr != text.data() + text.size())
    throw Error("malformed number '" + std::string(text) + "'");
  return value;
}

inline std::optional<double> parse_optional(std::string_view text) {
  if (text == "NA") return std::nullopt;
  return parse_double(text);
}

inline long parse_long(std::string_view text) {
  long value = 0;
  const auto result = std::from_chars(text.data(), text.data() + text.size(), value);
  if (result.ec != std::errc() || result.ptr != text.data() + text.size())
    throw Error("malformed integer '" + std::string(text) + "'");
  return value;
}

inline std::uint64_t parse_u64(std::string_view text) {
  std::uint64_t value = 0;
  const auto result = std::from_chars(text.data(), text.data() + text.size(), value);
  if (result.ec != std::errc() || result.ptr != text.data() + text.size())
    throw Error("malformed integer '" + std::string(text) + "'");
  return value;
}

}  // namespace warmvrp::csv
