#include "planx/threading.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>

namespace planx {

namespace {

int default_threads() {
  if (const char* env = std::getenv("PLANX_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return static_cast<int>(std::clamp(hw, 1u, 8u));
}

int g_threads = default_threads();

}  // namespace

int max_threads() { return g_threads; }

void set_max_threads(int n) { g_threads = std::max(1, n); }

}  // namespace planx
