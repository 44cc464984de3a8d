#include "vsrpp/runtime.hpp"

#include <Eigen/Core>

#include <cstdlib>
#include <stdexcept>
#include <string>

namespace vsrpp {

int configure_threads() {
  int threads = 1;
  if (const char* env = std::getenv("VSRPP_THREADS"); env && *env) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 1 || v > 1024) {
      throw std::invalid_argument("VSRPP_THREADS must be a positive integer, got '" + std::string(env) + "'");
    }
    threads = static_cast<int>(v);
  }
  Eigen::setNbThreads(threads);
  return threads;
}

}  // namespace vsrpp
