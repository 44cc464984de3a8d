#pragma once

namespace vsrpp {

/// Reads VSRPP_THREADS (default 1) and applies it to Eigen. Kernel
/// parallelism only takes effect in builds with OpenMP enabled.
int configure_threads();

}  // namespace vsrpp
