#pragma once

namespace sila {

/// Entry point of the `sila` tool. Returns 0 on success, 1 on usage
/// errors, 2 on data errors and 3 on internal errors.
int cli_dispatch(int argc, const char* const* argv);

}  // namespace sila
