#pragma once

#include <string>

namespace mfg {

enum class LogLevel { error = 0, info = 1, debug = 2 };

/// Current threshold; initialized from MFG_LOG (error, info, debug), default error.
LogLevel log_level();
void set_log_level(LogLevel level);
void log_message(LogLevel level, const std::string& message);

} // namespace mfg
