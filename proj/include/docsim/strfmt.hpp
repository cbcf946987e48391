#pragma once

#include <charconv>
#include <cstdio>
#include <string>
#include <system_error>

namespace docsim {

// Shortest decimal form that round-trips the exact double. Used wherever a
// file must be byte-stable and lossless (graph dumps, JSON, CSV).
inline std::string format_shortest(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string format_fixed(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
  return std::string(buf);
}

}  // namespace docsim
