#include "lulcseg/nn/parallel.hpp"

#include <algorithm>
#include <thread>
#include <vector>

namespace lulcseg::nn {

namespace {
int g_threads = 0;

int default_threads() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}
}  // namespace

void set_threads(int n) { g_threads = n < 0 ? 0 : n; }

int threads() { return g_threads > 0 ? g_threads : default_threads(); }

void parallel_for(int64_t begin, int64_t end,
                  const std::function<void(int64_t, int64_t)>& fn) {
  const int64_t count = end - begin;
  if (count <= 0) return;
  const int nthreads =
      static_cast<int>(std::min<int64_t>(threads(), count));
  if (nthreads <= 1 || count < 2) {
    fn(begin, end);
    return;
  }
  const int64_t chunk = (count + nthreads - 1) / nthreads;
  std::vector<std::thread> workers;
  workers.reserve(nthreads - 1);
  for (int t = 1; t < nthreads; ++t) {
    const int64_t lo = begin + t * chunk;
    const int64_t hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    workers.emplace_back(fn, lo, hi);
  }
  fn(begin, std::min(end, begin + chunk));
  for (auto& w : workers) w.join();
}

}  // namespace lulcseg::nn
