#pragma once

#include <functional>
#include <string>
#include <string_view>

namespace clfstack::log {

enum class Level { debug, info, warning, error };

using Sink = std::function<void(Level, std::string_view)>;

/// Replaces the process-wide sink. The default writes warnings and errors to
/// stderr. Pass nullptr to restore it.
void set_sink(Sink sink);
void set_min_level(Level level);

void write(Level level, std::string_view msg);
inline void info(std::string_view msg) { write(Level::info, msg); }
inline void warning(std::string_view msg) { write(Level::warning, msg); }

}  // namespace clfstack::log
