#pragma once

#include <cstddef>
#include <functional>

namespace sila {

/// Upper bound on worker threads used by parallel_for (the CLI's --jobs).
/// Zero restores the default of std::thread::hardware_concurrency().
void set_max_jobs(std::size_t jobs);
std::size_t max_jobs();

/// Runs body(i) for i in [0, n). Iterations must be independent and write
/// only to disjoint outputs; results are then independent of scheduling.
/// The first exception thrown by any iteration is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace sila
