#include "viablearn/log.hpp"

#include <cstdlib>
#include <iostream>
#include <string>

namespace viablearn::log {

namespace {

Level parse_level() {
    const char* env = std::getenv("VIABLEARN_LOG");
    if (env == nullptr) {
        return Level::Warn;
    }
    const std::string v(env);
    if (v == "error") return Level::Error;
    if (v == "info") return Level::Info;
    if (v == "debug") return Level::Debug;
    return Level::Warn;
}

void emit(Level lvl, const char* tag, std::string_view msg) {
    if (static_cast<int>(lvl) <= static_cast<int>(level())) {
        std::cerr << "[" << tag << "] " << msg << '\n';
    }
}

}  // namespace

Level level() {
    static const Level lvl = parse_level();
    return lvl;
}

void error(std::string_view msg) { emit(Level::Error, "error", msg); }
void warn(std::string_view msg) { emit(Level::Warn, "warn", msg); }
void info(std::string_view msg) { emit(Level::Info, "info", msg); }
void debug(std::string_view msg) { emit(Level::Debug, "debug", msg); }

}  // namespace viablearn::log
