#pragma once

#include <cstdio>
#include <string>

namespace tabb {

/// Round-trip decimal with 17 significant digits.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace tabb
