#pragma once

namespace alter::threads {

/// Number of parallel subject workers: omp_get_max_threads(), capped by the
/// ALTER_THREADS environment variable when it is set to a positive integer.
int worker_count();

/// Applies the ALTER_THREADS cap process-wide (calls omp_set_num_threads).
void apply_env_cap();

}  // namespace alter::threads
