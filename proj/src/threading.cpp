#include "cbpfa/threading.hpp"

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace cbpfa {

namespace {

std::atomic<int> g_threads{-1};

int resolve_default() {
  if (const char* env = std::getenv("CBPFA_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

}  // namespace

void set_thread_count(int n) { g_threads.store(n > 0 ? n : -1); }

int thread_count() {
  int n = g_threads.load();
  if (n <= 0) {
    n = resolve_default();
    g_threads.store(n);
  }
  return n;
}

void parallel_for(std::size_t begin, std::size_t end,
                  const std::function<void(std::size_t)>& fn,
                  std::size_t grain) {
  if (end <= begin) return;
  std::size_t count = end - begin;
  std::size_t workers = static_cast<std::size_t>(thread_count());
  if (workers <= 1 || count <= grain) {
    for (std::size_t i = begin; i < end; ++i) fn(i);
    return;
  }
  if (workers > count / grain + 1) workers = count / grain + 1;

  std::atomic<std::size_t> next{begin};
  auto worker = [&]() {
    for (;;) {
      std::size_t lo = next.fetch_add(grain);
      if (lo >= end) return;
      std::size_t hi = lo + grain < end ? lo + grain : end;
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
}

}  // namespace cbpfa
