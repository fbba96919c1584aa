#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace secad {

// Process-wide worker count. Defaults to SECAD_THREADS, else hardware concurrency.
int thread_count();
void set_thread_count(int n);

// Runs fn(i) for i in [0, count) on up to thread_count() threads. Work items
// are independent; callers that reduce results do so in index order afterwards,
// which keeps outputs independent of the thread count.
template <typename Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(thread_count()), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t t = 0; t + 1 < workers; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

// Pairwise tree sum with a fixed shape for a given length.
template <typename T>
T pairwise_sum(const T* values, std::size_t n) {
  if (n == 0) return T{};
  if (n == 1) return values[0];
  const std::size_t half = n / 2;
  return pairwise_sum(values, half) + pairwise_sum(values + half, n - half);
}

inline double pairwise_sum(const std::vector<double>& v) { return pairwise_sum(v.data(), v.size()); }

// Counter-based random stream: every (seed, counter) pair maps to an
// independent 64-bit value, so draws do not depend on evaluation order.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return mix64(mix64(mix64(seed) ^ a) ^ (b * 0x632be59bd9b4e019ULL));
}

// Uniform double in [0, 1) from the top 53 bits.
inline double counter_uniform(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return static_cast<double>(counter_hash(seed, a, b) >> 11) * 0x1.0p-53;
}

}  // namespace secad
