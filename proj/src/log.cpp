#include "entropyclust/log.hpp"

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

namespace entropyclust::log {

namespace {

Level parse_level() {
  const char* env = std::getenv("ENTROPYCLUST_LOG");
  if (env == nullptr) return Level::Error;
  const std::string v(env);
  if (v == "debug") return Level::Debug;
  if (v == "info") return Level::Info;
  return Level::Error;
}

const char* tag(Level lvl) {
  switch (lvl) {
    case Level::Error: return "error";
    case Level::Info: return "info";
    case Level::Debug: return "debug";
  }
  return "";
}

}  // namespace

Level level() {
  static const Level lvl = parse_level();
  return lvl;
}

void write(Level lvl, std::string_view msg) {
  if (static_cast<int>(lvl) > static_cast<int>(level())) return;
  static std::mutex mu;
  std::lock_guard lock(mu);
  std::cerr << "[" << tag(lvl) << "] " << msg << '\n';
}

}  // namespace entropyclust::log
