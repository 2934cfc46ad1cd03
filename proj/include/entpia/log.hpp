#pragma once

// Minimal leveled logging with a replaceable sink (stderr by default).

#include <functional>
#include <iostream>
#include <mutex>
#include <string>

namespace entpia {

enum class LogLevel { debug = 0, info = 1, warning = 2, error = 3, off = 4 };

struct Logger {
  LogLevel level = LogLevel::warning;
  std::function<void(LogLevel, const std::string&)> sink = [](LogLevel lv, const std::string& msg) {
    static const char* names[] = {"debug", "info", "warning", "error"};
    std::cerr << "[entpia " << names[static_cast<int>(lv)] << "] " << msg << '\n';
  };
  std::mutex mu;
};

inline Logger& logger() {
  static Logger l;
  return l;
}

inline void log(LogLevel lv, const std::string& msg) {
  Logger& l = logger();
  if (lv < l.level) return;
  std::lock_guard<std::mutex> lock(l.mu);
  if (l.sink) l.sink(lv, msg);
}

inline void log_info(const std::string& msg) { log(LogLevel::info, msg); }
inline void log_warning(const std::string& msg) { log(LogLevel::warning, msg); }

}  // namespace entpia
