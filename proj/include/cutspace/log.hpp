#pragma once

#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>

namespace cutspace::log {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

// Level is read once from CUTSPACE_LOG (error|warn|info|debug); default warn.
inline Level threshold() {
    static Level lvl = [] {
        const char* env = std::getenv("CUTSPACE_LOG");
        std::string s = env ? env : "warn";
        if (s == "error") return Level::error;
        if (s == "info") return Level::info;
        if (s == "debug") return Level::debug;
        return Level::warn;
    }();
    return lvl;
}

inline void emit(Level lvl, const std::string& msg) {
    if (lvl > threshold()) return;
    static const char* names[] = {"error", "warn", "info", "debug"};
    std::cerr << "[" << names[static_cast<int>(lvl)] << "] " << msg << "\n";
}

inline void warn(const std::string& msg) { emit(Level::warn, msg); }
inline void info(const std::string& msg) { emit(Level::info, msg); }
inline void debug(const std::string& msg) { emit(Level::debug, msg); }

} // namespace cutspace::log
