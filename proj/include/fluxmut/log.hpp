#pragma once

#include <string>

namespace fluxmut {

/// Writes "fluxmut: warning: <msg>" to stderr. Suppressible for tests.
void warn(const std::string& msg);
void set_warnings_enabled(bool enabled);

}  // namespace fluxmut
