#include "marn/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>
#include <set>
#include <string>

namespace marn::log {

namespace {
std::atomic<bool> g_verbose{false};
std::mutex g_once_mutex;
std::set<std::string> g_once_seen;
}

void warn(std::string_view message) { std::cerr << "[marn] warning: " << message << '\n'; }

void warn_once(std::string_view message) {
  {
    std::lock_guard<std::mutex> lock(g_once_mutex);
    if (!g_once_seen.emplace(message).second) return;
  }
  warn(message);
}

void info(std::string_view message) {
  if (g_verbose.load()) std::cerr << "[marn] " << message << '\n';
}

void set_verbose(bool verbose) { g_verbose.store(verbose); }
bool verbose() { return g_verbose.load(); }

}  // namespace marn::log
