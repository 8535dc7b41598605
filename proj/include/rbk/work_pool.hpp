#ifndef RBK_WORK_POOL_HPP
#define RBK_WORK_POOL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace rbk {

/// Resolves a --jobs style request: 0 means one worker per hardware thread.
inline std::size_t resolve_jobs(std::size_t jobs) {
  if (jobs > 0) return jobs;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Calls task(k) for k in [0, count) on up to `jobs` threads. Tasks must write
/// only to their own slot k; results therefore never depend on scheduling.
/// The first exception thrown by any task is rethrown after all workers join.
template <typename Task>
void run_pool(std::size_t count, std::size_t jobs, Task&& task) {
  const std::size_t workers = std::min(resolve_jobs(jobs), count);
  if (workers <= 1) {
    for (std::size_t k = 0; k < count; ++k) task(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  auto loop = [&] {
    for (std::size_t k = next++; k < count; k = next++) {
      try {
        task(k);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  for (std::size_t w = 1; w < workers; ++w) threads.emplace_back(loop);
  loop();
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

} // namespace rbk

#endif // RBK_WORK_POOL_HPP
