#pragma once

#include <fmt/format.h>

#include <string>
#include <utility>

namespace inclg::logging {

enum class Level { debug, info, warn, error, off };

/// Sends one formatted line to the process-wide logger (stderr).
void write(Level level, const std::string& message);
void set_level(Level level);
/// "debug", "info", "warn", "error" or "off"; anything else throws ConfigError.
Level parse_level(const std::string& name);

template <typename... Args>
void debug(fmt::format_string<Args...> format, Args&&... args) {
  write(Level::debug, fmt::format(format, std::forward<Args>(args)...));
}
template <typename... Args>
void info(fmt::format_string<Args...> format, Args&&... args) {
  write(Level::info, fmt::format(format, std::forward<Args>(args)...));
}
template <typename... Args>
void warn(fmt::format_string<Args...> format, Args&&... args) {
  write(Level::warn, fmt::format(format, std::forward<Args>(args)...));
}
template <typename... Args>
void error(fmt::format_string<Args...> format, Args&&... args) {
  write(Level::error, fmt::format(format, std::forward<Args>(args)...));
}

}  // namespace inclg::logging
