#pragma once

#include <charconv>
#include <cmath>
#include <string>

namespace metapot {

/// Locale-independent shortest decimal text that round-trips.
inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general);
  return std::string(buf, res.ptr);
}

}  // namespace metapot
