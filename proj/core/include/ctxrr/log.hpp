#pragma once

#include <string_view>

namespace ctxrr {

// Training progress and warnings go to standard error. Default: info.
enum class LogLevel { quiet, warn, info, debug };

void set_log_level(LogLevel level);

// Emits one line through the library logger (quiet is ignored).
void log_message(LogLevel level, std::string_view message);

}  // namespace ctxrr
