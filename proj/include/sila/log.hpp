#pragma once

#include <memory>

namespace spdlog {
class logger;
}

namespace sila {

/// Shared stderr logger. The level is read once from SILA_LOG
/// (error|warn|info|debug, default warn).
spdlog::logger& logger();

/// Re-read SILA_LOG; used by the CLI after option parsing.
void configure_logging();

}  // namespace sila
