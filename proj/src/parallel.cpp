#include "phonosig/parallel.hpp"

#include <cstdlib>
#include <string>

namespace phonosig {

std::size_t default_workers() {
  if (const char* env = std::getenv("PHONOSIG_WORKERS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

}  // namespace phonosig
