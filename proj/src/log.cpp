#include "varwind/log.hpp"

#include <iostream>
#include <mutex>

namespace varwind {
namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

LogSink& sink() {
  static LogSink s;
  return s;
}

}  // namespace

void set_log_sink(LogSink s) {
  std::lock_guard lock(sink_mutex());
  sink() = std::move(s);
}

void log(LogLevel level, const std::string& message) {
  std::lock_guard lock(sink_mutex());
  if (sink()) {
    sink()(level, message);
  } else if (level == LogLevel::warning) {
    std::cerr << "varwind: warning: " << message << '\n';
  }
}

}  // namespace varwind
