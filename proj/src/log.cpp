#include "promptvfx/log.hpp"

#include <iostream>
#include <mutex>

namespace pvfx::log {
namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

Sink& current_sink() {
  static Sink sink = [](const std::string& level, const std::string& message) {
    std::cerr << "[" << level << "] " << message << '\n';
  };
  return sink;
}

void emit(const char* level, const std::string& message) {
  std::lock_guard lock(sink_mutex());
  if (current_sink()) current_sink()(level, message);
}

}  // namespace

Sink set_sink(Sink sink) {
  std::lock_guard lock(sink_mutex());
  std::swap(current_sink(), sink);
  return sink;
}

void warn(const std::string& message) { emit("warn", message); }
void info(const std::string& message) { emit("info", message); }

}  // namespace pvfx::log
