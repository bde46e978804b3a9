#ifndef CUTFEM_PARALLEL_HPP
#define CUTFEM_PARALLEL_HPP

namespace cutfem {

/// Selects between the OpenMP kernels and their serial reference versions.
/// Both produce bitwise-identical results.
enum class Execution { kSerial, kParallel };

/// Number of OpenMP threads used by kParallel kernels (1 without OpenMP).
int thread_count();
void set_thread_count(int threads);

}  // namespace cutfem

#endif
