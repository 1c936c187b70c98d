#include "fitcarl/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

namespace fitcarl::logging {
namespace {

Level from_env() {
  const char* env = std::getenv("FITCARL_LOG");
  if (!env) return Level::Info;
  std::string v(env);
  if (v == "error") return Level::Error;
  if (v == "debug") return Level::Debug;
  return Level::Info;
}

std::atomic<int>& current() {
  static std::atomic<int> lvl{static_cast<int>(from_env())};
  return lvl;
}

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

void emit(Level lvl, const char* tag, std::string_view message) {
  if (static_cast<int>(lvl) > current().load()) return;
  std::lock_guard lock(sink_mutex());
  std::cerr << '[' << tag << "] " << message << '\n';
}

}  // namespace

Level level() { return static_cast<Level>(current().load()); }
void set_level(Level lvl) { current().store(static_cast<int>(lvl)); }

void error(std::string_view message) { emit(Level::Error, "error", message); }
void info(std::string_view message) { emit(Level::Info, "info", message); }
void debug(std::string_view message) { emit(Level::Debug, "debug", message); }

}  // namespace fitcarl::logging
