#include "tde/parallel.hpp"

#include <omp.h>

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <cstring>

namespace tde {

int worker_count() {
  int n = omp_get_max_threads();
  if (const char* env = std::getenv("TDE_THREADS")) {
    int cap = 0;
    auto r = std::from_chars(env, env + std::strlen(env), cap);
    if (r.ec == std::errc{} && cap > 0) n = std::min(n, cap);
  }
  return std::max(1, n);
}

}  // namespace tde
