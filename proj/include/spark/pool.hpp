// Small fork-join helper. SPARK_THREADS caps the worker count (unset = the
// hardware default). Tasks must write disjoint outputs; the helper never
// reduces across workers, so results are identical for any thread count.
#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace spark {

inline int thread_budget() {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) { n = 1; }
  if (const char* env = std::getenv("SPARK_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) { n = cap; }
  }
  return n;
}

// Runs f(i) for i in [0, n). Nested calls degrade to serial execution.
template <typename F>
void parallel_for(int n, F&& f) {
  static thread_local bool inside = false;
  const int workers = inside ? 1 : std::min(thread_budget(), n);
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) { f(i); }
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto run = [&]() {
    inside = true;
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) { break; }
      try {
        f(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) { error = std::current_exception(); }
      }
    }
    inside = false;
  };
  std::vector<std::thread> threads;
  threads.reserve(workers - 1);
  for (int t = 1; t < workers; ++t) { threads.emplace_back(run); }
  run();
  for (auto& t : threads) { t.join(); }
  if (error) { std::rethrow_exception(error); }
}

}  // namespace spark
