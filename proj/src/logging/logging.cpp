// Built without the libtorch include path: spdlog must see the system fmt,
// not the copy bundled in the torch headers.
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "inclg/errors.hpp"
#include "inclg/logging.hpp"

namespace inclg::logging {

namespace {

spdlog::logger& logger() {
  static auto instance = spdlog::stderr_color_mt("inclg");
  return *instance;
}

spdlog::level::level_enum to_spdlog(Level level) {
  switch (level) {
    case Level::debug: return spdlog::level::debug;
    case Level::info: return spdlog::level::info;
    case Level::warn: return spdlog::level::warn;
    case Level::error: return spdlog::level::err;
    case Level::off: break;
  }
  return spdlog::level::off;
}

}  // namespace

void write(Level level, const std::string& message) { logger().log(to_spdlog(level), message); }

void set_level(Level level) { logger().set_level(to_spdlog(level)); }

Level parse_level(const std::string& name) {
  if (name == "debug") return Level::debug;
  if (name == "info") return Level::info;
  if (name == "warn") return Level::warn;
  if (name == "error") return Level::error;
  if (name == "off") return Level::off;
  throw ConfigError("unknown log level '" + name + "'");
}

}  // namespace inclg::logging
