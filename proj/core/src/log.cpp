#include "ctxrr/log.hpp"

#include <memory>

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "training.hpp"

namespace ctxrr {

spdlog::logger& logger() {
  static std::shared_ptr<spdlog::logger> instance = [] {
    auto l = std::make_shared<spdlog::logger>("ctxrr", std::make_shared<spdlog::sinks::stderr_sink_mt>());
    l->set_pattern("[%l] %v");
    l->set_level(spdlog::level::info);
    return l;
  }();
  return *instance;
}

void set_log_level(LogLevel level) {
  switch (level) {
    case LogLevel::quiet: logger().set_level(spdlog::level::off); break;
    case LogLevel::warn: logger().set_level(spdlog::level::warn); break;
    case LogLevel::info: logger().set_level(spdlog::level::info); break;
    case LogLevel::debug: logger().set_level(spdlog::level::debug); break;
  }
}

void log_message(LogLevel level, std::string_view message) {
  switch (level) {
    case LogLevel::quiet: break;
    case LogLevel::warn: logger().warn("{}", message); break;
    case LogLevel::info: logger().info("{}", message); break;
    case LogLevel::debug: logger().debug("{}", message); break;
  }
}

}  // namespace ctxrr
