#pragma once

namespace tde {

// Worker cap for OpenMP regions: min(TDE_THREADS, omp_get_max_threads()),
// at least 1. TDE_THREADS=1 forces every parallel path onto the serial
// schedule.
int worker_count();

}  // namespace tde
