#include "artikin/log.hpp"

#include <cstdlib>
#include <string>

namespace artikin {

void init_logging() {
  const char* env = std::getenv("ARTIKIN_LOG");
  spdlog::level::level_enum level = spdlog::level::warn;
  if (env != nullptr) level = spdlog::level::from_str(env);
  spdlog::set_level(level);
  spdlog::set_pattern("[%l] %v");
}

}  // namespace artikin
