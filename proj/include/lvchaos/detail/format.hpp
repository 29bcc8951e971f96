#pragma once

#include <cstdio>
#include <string>

namespace lvchaos::detail {

/// Round-trippable decimal with 17 significant digits.
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace lvchaos::detail
