#ifndef CUTFEM_SPARSE_HPP
#define CUTFEM_SPARSE_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cutfem/parallel.hpp"

namespace cutfem {

/// Compressed sparse row matrix with sorted column indices per row.
class CsrMatrix {
 public:
  CsrMatrix() = default;
  CsrMatrix(std::int32_t rows, std::int32_t cols, std::vector<std::int64_t> row_ptr,
            std::vector<std::int32_t> col_idx, std::vector<double> values);

  /// Pattern from per-row sorted unique column lists, values zero.
  static CsrMatrix from_pattern(std::int32_t cols, const std::vector<std::vector<std::int32_t>>& rows);

  std::int32_t rows() const { return rows_; }
  std::int32_t cols() const { return cols_; }
  std::int64_t nnz() const { return static_cast<std::int64_t>(values_.size()); }

  const std::vector<std::int64_t>& row_ptr() const { return row_ptr_; }
  const std::vector<std::int32_t>& col_idx() const { return col_idx_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  /// Position of (r, c) in values(), or -1 if not in the pattern.
  std::int64_t find(std::int32_t r, std::int32_t c) const;
  double at(std::int32_t r, std::int32_t c) const;
  /// Adds v to an existing entry; throws if (r, c) is outside the pattern.
  void add(std::int32_t r, std::int32_t c, double v);

  /// y = A x.
  void multiply(std::span<const double> x, std::span<double> y,
                Execution exec = Execution::kParallel) const;

  /// Y = A X for k column-interleaved vectors: X[row * k + j].
  void multiply_block(std::span<const double> x, std::span<double> y, int k,
                      Execution exec = Execution::kParallel) const;

  CsrMatrix transpose() const;
  std::vector<double> diagonal() const;

  /// Max absolute row sum.
  double norm_inf() const;

  /// Coordinate text dump, one `row col value` per line.
  void write_coordinate(const std::filesystem::path& path) const;

 private:
  std::int32_t rows_ = 0;
  std::int32_t cols_ = 0;
  std::vector<std::int64_t> row_ptr_{0};
  std::vector<std::int32_t> col_idx_;
  std::vector<double> values_;
};

/// Infinity norm of A - B (patterns may differ).
double difference_norm_inf(const CsrMatrix& a, const CsrMatrix& b);

}  // namespace cutfem

#endif
