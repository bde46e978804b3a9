#include "cutfem/parallel.hpp"

#include <omp.h>

namespace cutfem {

int thread_count() { return omp_get_max_threads(); }

void set_thread_count(int threads) {
  if (threads > 0) omp_set_num_threads(threads);
}

}  // namespace cutfem
