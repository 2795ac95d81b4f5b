#pragma once

// Library-wide logger. Writes to standard error; verbosity comes from the
// SUBDYN_LOG environment variable (trace, debug, info, warn, error, off),
// defaulting to warn.

#include <cstdlib>
#include <memory>

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

namespace subdyn {

inline spdlog::logger& logger() {
  static const std::shared_ptr<spdlog::logger> instance = [] {
    auto sink = std::make_shared<spdlog::sinks::stderr_sink_mt>();
    auto lg = std::make_shared<spdlog::logger>("subdyn", sink);
    lg->set_pattern("[%l] %v");
    auto level = spdlog::level::warn;
    if (const char* env = std::getenv("SUBDYN_LOG"); env != nullptr) {
      level = spdlog::level::from_str(env);
    }
    lg->set_level(level);
    return lg;
  }();
  return *instance;
}

}  // namespace subdyn
