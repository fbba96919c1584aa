#include "secad/parallel.hpp"

#include <cstdlib>

namespace secad {

namespace {

int& thread_setting() {
  static int value = 0;
  return value;
}

}  // namespace

int thread_count() {
  if (thread_setting() > 0) return thread_setting();
  if (const char* env = std::getenv("SECAD_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

void set_thread_count(int n) { thread_setting() = n; }

}  // namespace secad
