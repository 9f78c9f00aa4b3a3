#pragma once

#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>

namespace trislam::log {

enum class Level { Debug = 0, Info = 1, Warn = 2 };

// Verbosity comes from SLAM_LOG=debug|info (default info).
inline Level threshold() {
  static Level lvl = [] {
    const char* env = std::getenv("SLAM_LOG");
    if (env && std::string(env) == "debug") return Level::Debug;
    return Level::Info;
  }();
  return lvl;
}

template <typename... Args>
void emit(Level lvl, const char* tag, Args&&... args) {
  if (lvl < threshold()) return;
  std::ostringstream os;
  os << "[" << tag << "] ";
  (os << ... << args);
  std::cerr << os.str() << "\n";
}

template <typename... Args>
void debug(Args&&... args) { emit(Level::Debug, "debug", std::forward<Args>(args)...); }
template <typename... Args>
void info(Args&&... args) { emit(Level::Info, "info", std::forward<Args>(args)...); }
template <typename... Args>
void warn(Args&&... args) { emit(Level::Warn, "warn", std::forward<Args>(args)...); }

}  // namespace trislam::log
