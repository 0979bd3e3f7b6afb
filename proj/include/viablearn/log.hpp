#pragma once

#include <string_view>

namespace viablearn::log {

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };

/// Read once from VIABLEARN_LOG (error|warn|info|debug); defaults to warn.
Level level();

void error(std::string_view msg);
void warn(std::string_view msg);
void info(std::string_view msg);
void debug(std::string_view msg);

}  // namespace viablearn::log
