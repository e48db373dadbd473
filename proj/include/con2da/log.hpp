#pragma once

#include <string_view>

#include <spdlog/spdlog.h>

namespace con2da::log {

enum class Level { quiet, info, debug };

/// Throws ConfigError for names other than quiet, info and debug.
Level parse_level(std::string_view name);
void set_level(Level level);
/// Applies C2DA_LOG when set; an invalid value throws ConfigError.
void init_from_env();

using spdlog::debug;
using spdlog::info;
using spdlog::warn;

}  // namespace con2da::log
