#pragma once

#include <functional>
#include <string>

namespace pvfx::log {

using Sink = std::function<void(const std::string& level, const std::string& message)>;

// Replaces the process-wide sink (stderr by default). Returns the previous one.
Sink set_sink(Sink sink);

void warn(const std::string& message);
void info(const std::string& message);

}  // namespace pvfx::log
