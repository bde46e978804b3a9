#ifndef CUTFEM_TRANSFER_HPP
#define CUTFEM_TRANSFER_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cutfem/assembly.hpp"
#include "cutfem/electrodes.hpp"
#include "cutfem/krylov.hpp"

namespace cutfem {

/// Maps a load vector to re-referenced electrode potentials.
/// Row i belongs to the i-th non-reference electrode.
struct TransferMatrix {
  int electrodes = 0;
  int reference = 0;
  Dof dofs = 0;
  std::vector<double> rows;       // (electrodes - 1) x dofs, row-major
  std::vector<double> residuals;  // achieved relative residual per row
  std::vector<int> iterations;

  int row_count() const { return electrodes > 0 ? electrodes - 1 : 0; }
  std::span<const double> row(int i) const {
    return {rows.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(dofs),
            static_cast<std::size_t>(dofs)};
  }
  /// Electrode that row i belongs to.
  int electrode_of_row(int i) const { return i < reference ? i : i + 1; }
};

/// Solves K^T t_e = r_e - r_ref for every electrode except the reference.
/// Solver errors are rethrown with the electrode index in the message and in
/// rhs_index().
TransferMatrix transfer_matrix(const SparseSystem& system, const ElectrodeSet& electrodes,
                               int reference = 0, const SolverOptions& options = {});

/// Electrode potentials for a load vector, 0 at the reference electrode.
std::vector<double> apply_transfer(const TransferMatrix& t, std::span<const double> load);

/// Binary file: text header `TRANSFER e N ref [tag]` and a newline, followed by
/// the rows as little-endian float64.
void write_transfer(const std::filesystem::path& path, const TransferMatrix& t, const std::string& tag = {});
TransferMatrix read_transfer(const std::filesystem::path& path, std::string* tag = nullptr);

}  // namespace cutfem

#endif
