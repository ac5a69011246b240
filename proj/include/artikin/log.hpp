#pragma once

#include <spdlog/spdlog.h>

namespace artikin {

/// Applies the verbosity named by the ARTIKIN_LOG environment variable
/// (trace, debug, info, warn, error, off). Defaults to warn.
void init_logging();

}  // namespace artikin
