#pragma once

#include <cstdlib>
#include <iostream>
#include <string>

namespace subt_beacon::log {

/// Diagnostic verbosity from SUBT_BEACON_LOG: 0 (default) silent,
/// 1 progress, 2 debug.
inline int level() {
  static const int value = [] {
    const char* env = std::getenv("SUBT_BEACON_LOG");
    if (!env) return 0;
    const std::string s(env);
    if (s == "debug" || s == "2") return 2;
    if (s == "info" || s == "1") return 1;
    return 0;
  }();
  return value;
}

inline void diag(int at_level, const std::string& msg) {
  if (level() >= at_level) std::cerr << "[subt_beacon] " << msg << "\n";
}

}  // namespace subt_beacon::log
