// Error taxonomy and environment knobs shared across the library.
#pragma once

#include <cstdlib>
#include <stdexcept>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace plastisim {

// Codes double as CLI exit codes.
enum class ErrorCode : int {
  Config = 2,
  Diverged = 3,
  Tolerance = 4,
  Invalid = 5,
  Io = 6,
};

struct Error : std::runtime_error {
  ErrorCode code;
  Error(ErrorCode c, const std::string& msg) : std::runtime_error(msg), code(c) {}
};

[[noreturn]] inline void fail(ErrorCode c, const std::string& msg) {
  throw Error(c, msg);
}

// Worker count for data-parallel loops. PLASTISIM_DETERMINISTIC=1 forces a
// single thread (bit-identical regardless of machine); otherwise
// PLASTISIM_THREADS picks the count, defaulting to the OpenMP maximum. Results
// are deterministic for any fixed thread count (ordered per-thread reduction).
inline int thread_count() {
  if (const char* det = std::getenv("PLASTISIM_DETERMINISTIC"))
    if (det[0] == '1') return 1;
  if (const char* env = std::getenv("PLASTISIM_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace plastisim
