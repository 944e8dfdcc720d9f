#pragma once

#include <charconv>
#include <map>
#include <string>
#include <string_view>

#include "brpath/errors.hpp"

namespace brpath {

/// "a=1,b=x" -> {a: "1", b: "x"}. Duplicate or malformed items throw.
inline std::map<std::string, std::string> parse_params(std::string_view text, std::string_view context) {
  std::map<std::string, std::string> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t comma = text.find(',', pos);
    if (comma == std::string_view::npos) comma = text.size();
    const std::string_view item = text.substr(pos, comma - pos);
    const std::size_t eq = item.find('=');
    if (eq == std::string_view::npos || eq == 0) {
      throw InvalidArgument(std::string(context) + ": malformed parameter '" + std::string(item) + "'");
    }
    const std::string key(item.substr(0, eq));
    if (!out.emplace(key, std::string(item.substr(eq + 1))).second) {
      throw InvalidArgument(std::string(context) + ": duplicate parameter '" + key + "'");
    }
    pos = comma + 1;
  }
  return out;
}

inline double parse_double(const std::string& s, std::string_view what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InvalidArgument("expected a number for " + std::string(what) + ", got '" + s + "'");
  }
}

inline int parse_int(const std::string& s, std::string_view what) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw InvalidArgument("expected an integer for " + std::string(what) + ", got '" + s + "'");
  }
  return v;
}

}  // namespace brpath
