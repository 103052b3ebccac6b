#include "udm/log.hpp"

#include <cstdlib>
#include <iostream>
#include <mutex>

namespace udm {

namespace {

LogLevel level_from_env() {
  const char* env = std::getenv("UDM_LOG");
  if (env == nullptr) return LogLevel::warn;
  const std::string value(env);
  if (value == "quiet" || value == "0") return LogLevel::quiet;
  if (value == "warn" || value == "1") return LogLevel::warn;
  if (value == "info" || value == "2") return LogLevel::info;
  if (value == "debug" || value == "3") return LogLevel::debug;
  return LogLevel::warn;
}

LogLevel g_level = level_from_env();
std::mutex g_mutex;

const char* level_tag(LogLevel level) {
  switch (level) {
    case LogLevel::warn: return "warn";
    case LogLevel::info: return "info";
    case LogLevel::debug: return "debug";
    default: return "";
  }
}

}  // namespace

LogLevel log_level() { return g_level; }

void set_log_level(LogLevel level) { g_level = level; }

void log_message(LogLevel level, const std::string& message) {
  if (static_cast<int>(level) > static_cast<int>(g_level)) return;
  std::lock_guard<std::mutex> lock(g_mutex);
  std::cerr << "[udm " << level_tag(level) << "] " << message << "\n";
}

}  // namespace udm
