#pragma once

#include <sstream>
#include <string>

namespace udm {

enum class LogLevel { quiet = 0, warn = 1, info = 2, debug = 3 };

/// Current level; initialized from the UDM_LOG environment variable
/// (quiet|warn|info|debug), default warn.
LogLevel log_level();
void set_log_level(LogLevel level);

void log_message(LogLevel level, const std::string& message);

namespace detail {
template <class... Args>
std::string log_format(Args&&... args) {
  std::ostringstream out;
  (out << ... << args);
  return out.str();
}
}  // namespace detail

template <class... Args>
void log_warn(Args&&... args) {
  log_message(LogLevel::warn, detail::log_format(std::forward<Args>(args)...));
}

template <class... Args>
void log_info(Args&&... args) {
  log_message(LogLevel::info, detail::log_format(std::forward<Args>(args)...));
}

template <class... Args>
void log_debug(Args&&... args) {
  log_message(LogLevel::debug, detail::log_format(std::forward<Args>(args)...));
}

}  // namespace udm
