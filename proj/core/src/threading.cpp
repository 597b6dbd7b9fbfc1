#include "ntklab/threading.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace ntklab {

namespace {

int env_default() {
  if (const char* env = std::getenv("NTKLAB_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

int& override_slot() {
  static int n = 0;  // 0: use env/hardware default
  return n;
}

}  // namespace

int thread_count() {
  int n = override_slot();
  return n >= 1 ? n : env_default();
}

void set_thread_count(int n) { override_slot() = n >= 1 ? n : 0; }

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body) {
  if (n == 0) return;
  std::size_t workers = std::min<std::size_t>(thread_count(), n);
  if (workers <= 1) {
    body(0, n);
    return;
  }
  std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    std::size_t begin = w * chunk;
    std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&body, begin, end] { body(begin, end); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace ntklab
