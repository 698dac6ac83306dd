#pragma once

#include <iostream>
#include <mutex>
#include <sstream>
#include <string>

namespace advos::log {

enum class Level { kDebug = 0, kInfo = 1, kWarn = 2, kError = 3 };

Level& threshold();

void emit(Level lvl, const std::string& msg);

template <typename... Args>
void write(Level lvl, Args&&... args) {
    if (lvl < threshold()) return;
    std::ostringstream os;
    (os << ... << args);
    emit(lvl, os.str());
}

template <typename... Args>
void debug(Args&&... args) {
    write(Level::kDebug, std::forward<Args>(args)...);
}
template <typename... Args>
void info(Args&&... args) {
    write(Level::kInfo, std::forward<Args>(args)...);
}
template <typename... Args>
void warn(Args&&... args) {
    write(Level::kWarn, std::forward<Args>(args)...);
}
template <typename... Args>
void error(Args&&... args) {
    write(Level::kError, std::forward<Args>(args)...);
}

}  // namespace advos::log
