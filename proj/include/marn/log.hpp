#pragma once

#include <string_view>

namespace marn::log {

void warn(std::string_view message);
// Emits a given message text at most once per process.
void warn_once(std::string_view message);
void info(std::string_view message);

// Messages below warning level are dropped unless verbose output is enabled.
void set_verbose(bool verbose);
bool verbose();

}  // namespace marn::log
