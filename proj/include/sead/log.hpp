#pragma once

#include <cstdlib>
#include <memory>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace sead {

inline constexpr const char* kLogLevelVariable = "SEAD_LOG_LEVEL";

/// Shared stderr logger. Verbosity comes from SEAD_LOG_LEVEL
/// (trace, debug, info, warn, error, critical, off); default warn.
inline spdlog::logger& log() {
  static const std::shared_ptr<spdlog::logger> logger = [] {
    auto l = std::make_shared<spdlog::logger>("sead", std::make_shared<spdlog::sinks::stderr_color_sink_mt>());
    l->set_pattern("[%l] %v");
    spdlog::level::level_enum level = spdlog::level::warn;
    if (const char* env = std::getenv(kLogLevelVariable)) {
      const auto parsed = spdlog::level::from_str(env);
      // from_str maps unknown names to off; only accept real names.
      if (parsed != spdlog::level::off || std::string(env) == "off") level = parsed;
    }
    l->set_level(level);
    return l;
  }();
  return *logger;
}

}  // namespace sead
