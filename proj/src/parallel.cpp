#include "cwm/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace cwm::par {

int& thread_count() {
  static int count = 1;
  return count;
}

void parallel_for(std::ptrdiff_t n,
                  const std::function<void(std::ptrdiff_t, std::ptrdiff_t)>& fn) {
  constexpr std::ptrdiff_t kChunk = 2048;
  const int workers = std::max(1, thread_count());
  if (workers == 1 || n <= kChunk) {
    fn(0, n);
    return;
  }
  std::atomic<std::ptrdiff_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::ptrdiff_t begin = next.fetch_add(kChunk);
      if (begin >= n) return;
      fn(begin, std::min(begin + kChunk, n));
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (int i = 1; i < workers; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
}

double pairwise_sum(const double* data, std::ptrdiff_t n) {
  if (n <= 32) {
    double acc = 0.0;
    for (std::ptrdiff_t i = 0; i < n; ++i) acc += data[i];
    return acc;
  }
  const std::ptrdiff_t half = n / 2;
  return pairwise_sum(data, half) + pairwise_sum(data + half, n - half);
}

}  // namespace cwm::par
