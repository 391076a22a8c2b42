#include "pmp/parallel.hpp"

#include <cstdlib>
#include <string>

namespace pmp {

std::size_t worker_count() {
  static const std::size_t count = [] {
    if (const char* env = std::getenv("PMP_THREADS")) {
      try {
        const long v = std::stol(env);
        if (v > 0) return static_cast<std::size_t>(v);
      } catch (...) {
      }
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return static_cast<std::size_t>(hw ? hw : 1);
  }();
  return count;
}

}  // namespace pmp
