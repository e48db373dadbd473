#include "con2da/log.hpp"

#include <cstdlib>
#include <string>

#include "con2da/errors.hpp"

namespace con2da::log {

Level parse_level(std::string_view name) {
  if (name == "quiet") return Level::quiet;
  if (name == "info") return Level::info;
  if (name == "debug") return Level::debug;
  throw ConfigError("C2DA_LOG must be quiet, info or debug, got '" + std::string(name) + "'");
}

void set_level(Level level) {
  switch (level) {
    case Level::quiet: spdlog::set_level(spdlog::level::err); break;
    case Level::info: spdlog::set_level(spdlog::level::info); break;
    case Level::debug: spdlog::set_level(spdlog::level::debug); break;
  }
}

void init_from_env() {
  spdlog::set_pattern("[%l] %v");
  const char* value = std::getenv("C2DA_LOG");
  set_level(value ? parse_level(value) : Level::info);
}

}  // namespace con2da::log
