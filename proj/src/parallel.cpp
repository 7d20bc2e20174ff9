#include "robust_coords/parallel.hpp"

namespace robust_coords {

namespace {
std::atomic<unsigned> configured{1};
}

void set_thread_count(unsigned count) { configured = count; }

unsigned thread_count() {
  const unsigned c = configured;
  if (c != 0) return c;
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace robust_coords
