#pragma once

#include <string_view>

namespace fitcarl::logging {

enum class Level { Error = 0, Info = 1, Debug = 2 };

/// Reads FITCARL_LOG (error|info|debug) once; defaults to info.
Level level();
void set_level(Level level);

void error(std::string_view message);
void info(std::string_view message);
void debug(std::string_view message);

}  // namespace fitcarl::logging
