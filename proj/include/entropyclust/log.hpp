#pragma once

#include <string_view>

namespace entropyclust::log {

enum class Level { Error = 0, Info = 1, Debug = 2 };

// Reads ENTROPYCLUST_LOG once; defaults to error.
Level level();
void write(Level lvl, std::string_view msg);

inline void error(std::string_view m) { write(Level::Error, m); }
inline void info(std::string_view m) { write(Level::Info, m); }
inline void debug(std::string_view m) { write(Level::Debug, m); }

}  // namespace entropyclust::log
