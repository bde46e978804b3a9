#ifndef CUTFEM_KRYLOV_HPP
#define CUTFEM_KRYLOV_HPP

#include <span>
#include <string_view>
#include <vector>

#include "cutfem/assembly.hpp"
#include "cutfem/parallel.hpp"
#include "cutfem/sparse.hpp"

namespace cutfem {

enum class Preconditioner { kJacobi, kSymmetricGaussSeidel };

std::string_view to_string(Preconditioner p);
Preconditioner parse_preconditioner(std::string_view name);

struct SolverOptions {
  double tolerance = 1e-8;  // relative residual ||b - Kx|| / ||b||
  int max_iterations = 10000;
  Preconditioner preconditioner = Preconditioner::kJacobi;
  int block_size = 8;  // right-hand sides advanced together by solve_block
  Execution exec = Execution::kParallel;
};

struct SolveResult {
  std::vector<double> x;  // zero mean
  int iterations = 0;
  double relative_residual = 0.0;
  std::vector<double> history;
};

/// Mean-corrected copy of a Neumann load. Throws DomainError when the sum is
/// not negligible, |sum| > 1e-10 ||f||_1.
std::vector<double> make_compatible(std::span<const double> load);

/// Solves K x = b with PCG for symmetric systems and BiCGstab otherwise.
SolveResult solve(const SparseSystem& system, std::span<const double> load,
                  const SolverOptions& options = {});

/// Same as solve() for several right-hand sides. The iterates of each column
/// are bitwise identical to solving it alone.
std::vector<SolveResult> solve_block(const SparseSystem& system,
                                     const std::vector<std::vector<double>>& loads,
                                     const SolverOptions& options = {});

/// Inverse of a preconditioner M applied as z = M^{-1} r.
class PreconditionerOp {
 public:
  PreconditionerOp(const CsrMatrix& k, Preconditioner kind);
  /// Applies to k interleaved columns.
  void apply(std::span<const double> r, std::span<double> z, int k) const;

 private:
  const CsrMatrix& matrix_;
  Preconditioner kind_;
  std::vector<double> inv_diag_;
};

}  // namespace cutfem

#endif
