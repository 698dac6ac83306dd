#include "advos/log.hpp"

namespace advos::log {

namespace {
std::mutex g_mutex;
const char* name(Level lvl) {
    switch (lvl) {
        case Level::kDebug: return "debug";
        case Level::kInfo: return "info";
        case Level::kWarn: return "warn";
        case Level::kError: return "error";
    }
    return "?";
}
}  // namespace

Level& threshold() {
    static Level lvl = Level::kInfo;
    return lvl;
}

void emit(Level lvl, const std::string& msg) {
    std::lock_guard<std::mutex> lock(g_mutex);
    std::cerr << "[advos:" << name(lvl) << "] " << msg << "\n";
}

}  // namespace advos::log
