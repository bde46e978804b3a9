#include "cutfem/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>
#include <fmt/os.h>

#include "cutfem/error.hpp"

namespace cutfem {

CsrMatrix::CsrMatrix(std::int32_t rows, std::int32_t cols, std::vector<std::int64_t> row_ptr,
                     std::vector<std::int32_t> col_idx, std::vector<double> values)
    : rows_(rows), cols_(cols), row_ptr_(std::move(row_ptr)), col_idx_(std::move(col_idx)),
      values_(std::move(values)) {
  if (row_ptr_.size() != static_cast<std::size_t>(rows_) + 1 || col_idx_.size() != values_.size() ||
      row_ptr_.back() != static_cast<std::int64_t>(values_.size())) {
    throw DomainError("inconsistent CSR arrays");
  }
}

CsrMatrix CsrMatrix::from_pattern(std::int32_t cols,
                                  const std::vector<std::vector<std::int32_t>>& rows) {
  std::vector<std::int64_t> ptr(rows.size() + 1, 0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    ptr[r + 1] = ptr[r] + static_cast<std::int64_t>(rows[r].size());
  }
  std::vector<std::int32_t> idx;
  idx.reserve(static_cast<std::size_t>(ptr.back()));
  for (const auto& row : rows) idx.insert(idx.end(), row.begin(), row.end());
  std::vector<double> vals(idx.size(), 0.0);
  return CsrMatrix(static_cast<std::int32_t>(rows.size()), cols, std::move(ptr), std::move(idx),
                   std::move(vals));
}

std::int64_t CsrMatrix::find(std::int32_t r, std::int32_t c) const {
  const auto begin = col_idx_.begin() + row_ptr_[static_cast<std::size_t>(r)];
  const auto end = col_idx_.begin() + row_ptr_[static_cast<std::size_t>(r) + 1];
  const auto it = std::lower_bound(begin, end, c);
  if (it == end || *it != c) return -1;
  return it - col_idx_.begin();
}

double CsrMatrix::at(std::int32_t r, std::int32_t c) const {
  const auto k = find(r, c);
  return k < 0 ? 0.0 : values_[static_cast<std::size_t>(k)];
}

void CsrMatrix::add(std::int32_t r, std::int32_t c, double v) {
  const auto k = find(r, c);
  if (k < 0) throw DomainError(fmt::format("entry ({}, {}) is not in the sparsity pattern", r, c));
  values_[static_cast<std::size_t>(k)] += v;
}

void CsrMatrix::multiply(std::span<const double> x, std::span<double> y, Execution exec) const {
  if (x.size() != static_cast<std::size_t>(cols_) || y.size() != static_cast<std::size_t>(rows_)) {
    throw DomainError("matrix-vector dimension mismatch");
  }
  const auto row = [&](std::int32_t r) {
    double s = 0.0;
    for (auto k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) s += values_[k] * x[col_idx_[k]];
    y[r] = s;
  };
  if (exec == Execution::kParallel) {
#pragma omp parallel for schedule(static)
    for (std::int32_t r = 0; r < rows_; ++r) row(r);
  } else {
    for (std::int32_t r = 0; r < rows_; ++r) row(r);
  }
}

void CsrMatrix::multiply_block(std::span<const double> x, std::span<double> y, int k,
                               Execution exec) const {
  const auto kk = static_cast<std::size_t>(k);
  if (k <= 0 || x.size() != static_cast<std::size_t>(cols_) * kk ||
      y.size() != static_cast<std::size_t>(rows_) * kk) {
    throw DomainError("matrix-block dimension mismatch");
  }
  const auto row = [&](std::int32_t r) {
    double* out = &y[static_cast<std::size_t>(r) * kk];
    std::fill(out, out + kk, 0.0);
    for (auto e = row_ptr_[r]; e < row_ptr_[r + 1]; ++e) {
      const double a = values_[e];
      const double* in = &x[static_cast<std::size_t>(col_idx_[e]) * kk];
      for (std::size_t j = 0; j < kk; ++j) out[j] += a * in[j];
    }
  };
  if (exec == Execution::kParallel) {
#pragma omp parallel for schedule(static)
    for (std::int32_t r = 0; r < rows_; ++r) row(r);
  } else {
    for (std::int32_t r = 0; r < rows_; ++r) row(r);
  }
}

CsrMatrix CsrMatrix::transpose() const {
  std::vector<std::int64_t> ptr(static_cast<std::size_t>(cols_) + 1, 0);
  for (auto c : col_idx_) ++ptr[static_cast<std::size_t>(c) + 1];
  for (std::size_t c = 0; c < static_cast<std::size_t>(cols_); ++c) ptr[c + 1] += ptr[c];
  std::vector<std::int32_t> idx(col_idx_.size());
  std::vector<double> vals(values_.size());
  std::vector<std::int64_t> next(ptr.begin(), ptr.end() - 1);
  for (std::int32_t r = 0; r < rows_; ++r) {
    for (auto k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      const auto slot = next[static_cast<std::size_t>(col_idx_[k])]++;
      idx[slot] = r;
      vals[slot] = values_[k];
    }
  }
  return CsrMatrix(cols_, rows_, std::move(ptr), std::move(idx), std::move(vals));
}

std::vector<double> CsrMatrix::diagonal() const {
  std::vector<double> d(static_cast<std::size_t>(std::min(rows_, cols_)), 0.0);
  for (std::int32_t r = 0; r < static_cast<std::int32_t>(d.size()); ++r) d[r] = at(r, r);
  return d;
}

double CsrMatrix::norm_inf() const {
  double best = 0.0;
  for (std::int32_t r = 0; r < rows_; ++r) {
    double s = 0.0;
    for (auto k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) s += std::abs(values_[k]);
    best = std::max(best, s);
  }
  return best;
}

void CsrMatrix::write_coordinate(const std::filesystem::path& path) const {
  std::ofstream probe(path);
  if (!probe) throw IoError(fmt::format("cannot open {} for writing", path.string()));
  probe.close();
  auto out = fmt::output_file(path.string());
  for (std::int32_t r = 0; r < rows_; ++r) {
    for (auto k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      out.print("{} {} {:.17g}\n", r, col_idx_[k], values_[k]);
    }
  }
}

double difference_norm_inf(const CsrMatrix& a, const CsrMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DomainError("matrix dimension mismatch");
  double best = 0.0;
  for (std::int32_t r = 0; r < a.rows(); ++r) {
    auto ka = a.row_ptr()[r];
    auto kb = b.row_ptr()[r];
    const auto ea = a.row_ptr()[r + 1];
    const auto eb = b.row_ptr()[r + 1];
    double s = 0.0;
    while (ka < ea || kb < eb) {
      const auto ca = ka < ea ? a.col_idx()[ka] : INT32_MAX;
      const auto cb = kb < eb ? b.col_idx()[kb] : INT32_MAX;
      if (ca == cb) {
        s += std::abs(a.values()[ka++] - b.values()[kb++]);
      } else if (ca < cb) {
        s += std::abs(a.values()[ka++]);
      } else {
        s += std::abs(b.values()[kb++]);
      }
    }
    best = std::max(best, s);
  }
  return best;
}

}  // namespace cutfem
