#pragma once

#include <functional>
#include <string>

namespace varwind {

enum class LogLevel { info, warning };

using LogSink = std::function<void(LogLevel, const std::string&)>;

// Replaces the process-wide sink (default: warnings to stderr, info dropped).
// Passing an empty function restores the default.
void set_log_sink(LogSink sink);
void log(LogLevel level, const std::string& message);
inline void log_warning(const std::string& message) { log(LogLevel::warning, message); }
inline void log_info(const std::string& message) { log(LogLevel::info, message); }

}  // namespace varwind
