#include "sila/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace sila {

namespace {
std::atomic<std::size_t> g_max_jobs{0};
// Nested parallel_for calls run inline instead of multiplying threads.
thread_local bool t_inside_worker = false;
}

void set_max_jobs(std::size_t jobs) { g_max_jobs = jobs; }

std::size_t max_jobs() {
  std::size_t jobs = g_max_jobs.load();
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  return jobs;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = t_inside_worker ? 1 : std::min(max_jobs(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    const bool was_inside = t_inside_worker;
    t_inside_worker = true;
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
    t_inside_worker = was_inside;
  };
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace sila
