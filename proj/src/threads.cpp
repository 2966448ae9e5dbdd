#include "alter/threads.hpp"

#include <omp.h>

#include <cstdlib>
#include <string>

namespace alter::threads {

int worker_count() {
  int n = omp_get_max_threads();
  if (const char* env = std::getenv("ALTER_THREADS")) {
    try {
      int cap = std::stoi(env);
      if (cap >= 1 && cap < n) n = cap;
    } catch (...) {
      // unparsable value: ignore and keep the OpenMP default
    }
  }
  return n;
}

void apply_env_cap() { omp_set_num_threads(worker_count()); }

}  // namespace alter::threads
