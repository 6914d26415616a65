#include "clfstack/log.hpp"

#include <iostream>
#include <mutex>

namespace clfstack::log {
namespace {

std::mutex g_mutex;
Sink g_sink;
Level g_min_level = Level::warning;

const char* label(Level level) {
  switch (level) {
    case Level::debug: return "debug";
    case Level::info: return "info";
    case Level::warning: return "warning";
    case Level::error: return "error";
  }
  return "?";
}

}  // namespace

void set_sink(Sink sink) {
  std::lock_guard lock(g_mutex);
  g_sink = std::move(sink);
}

void set_min_level(Level level) {
  std::lock_guard lock(g_mutex);
  g_min_level = level;
}

void write(Level level, std::string_view msg) {
  std::lock_guard lock(g_mutex);
  if (level < g_min_level) return;
  if (g_sink) {
    g_sink(level, msg);
    return;
  }
  std::cerr << "[" << label(level) << "] " << msg << '\n';
}

}  // namespace clfstack::log
