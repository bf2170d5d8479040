#include "pcmmap/threads.hpp"

#include <atomic>
#include <cstdlib>
#include <thread>

namespace pcmmap {

namespace {

int initial_default() {
  if (const char* env = std::getenv("PCMMAP_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

std::atomic<int>& default_slot() {
  static std::atomic<int> value{initial_default()};
  return value;
}

}  // namespace

int default_threads() { return default_slot().load(); }

void set_default_threads(int n) { default_slot().store(n < 1 ? 1 : n); }

int resolve_threads(int requested) {
  if (requested == 0) return default_threads();
  return requested < 1 ? 1 : requested;
}

}  // namespace pcmmap
