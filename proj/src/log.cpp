#include "fluxmut/log.hpp"

#include <atomic>
#include <iostream>

namespace fluxmut {

namespace {
std::atomic<bool> g_warnings_enabled{true};
}

void warn(const std::string& msg) {
  if (g_warnings_enabled.load())
    std::cerr << "fluxmut: warning: " << msg << "\n";
}

void set_warnings_enabled(bool enabled) { g_warnings_enabled.store(enabled); }

}  // namespace fluxmut
