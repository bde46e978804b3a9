#include "cutfem/transfer.hpp"

#include <bit>
#include <cstring>
#include <exception>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "cutfem/error.hpp"
#include "cutfem/parallel.hpp"


namespace cutfem {

namespace {

static_assert(std::endian::native == std::endian::little, "transfer files assume a little-endian host");

}  // namespace

TransferMatrix transfer_matrix(const SparseSystem& system, const ElectrodeSet& electrodes, int reference,
                               const SolverOptions& options) {
  const int e_count = static_cast<int>(electrodes.size());
  if (e_count < 2) throw ConfigError("a transfer matrix needs at least two electrodes");
  if (reference < 0 || reference >= e_count) {
    throw ConfigError(fmt::format("reference electrode {} out of range [0, {})", reference, e_count));
  }
  if (options.block_size <= 0) throw ConfigError("solver block size must be positive");

  SparseSystem adjoint = system;
  if (!system.symmetric()) adjoint.stiffness = system.stiffness.transpose();

  const Dof n = system.stiffness.rows();
  const auto r_ref = electrodes.row(static_cast<std::size_t>(reference));
  std::vector<std::vector<double>> rhs;
  std::vector<int> owner;
  for (int e = 0; e < e_count; ++e) {
    if (e == reference) continue;
    auto r = electrodes.row(static_cast<std::size_t>(e));
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= r_ref[i];
    rhs.push_back(std::move(r));
    owner.push_back(e);
  }

  const auto bs = static_cast<std::size_t>(options.block_size);
  const auto groups = static_cast<std::int64_t>((rhs.size() + bs - 1) / bs);
  // Enough groups to keep every thread busy: one group per thread with serial
  // kernels. Otherwise the kernels themselves run in parallel.
  const bool outer = groups >= thread_count() && thread_count() > 1;
  SolverOptions inner = options;
  if (outer) inner.exec = Execution::kSerial;

  std::vector<SolveResult> results(rhs.size());
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(groups));
  const auto run = [&](std::int64_t g) {
    const std::size_t start = static_cast<std::size_t>(g) * bs;
    const std::size_t end = std::min(rhs.size(), start + bs);
    try {
      std::vector<std::vector<double>> block(rhs.begin() + static_cast<std::ptrdiff_t>(start),
                                             rhs.begin() + static_cast<std::ptrdiff_t>(end));
      auto res = solve_block(adjoint, block, inner);
      for (std::size_t j = 0; j < res.size(); ++j) results[start + j] = std::move(res[j]);
    } catch (const SolverError& err) {
      const int e = owner[start + static_cast<std::size_t>(std::max(0, err.rhs_index()))];
      errors[static_cast<std::size_t>(g)] = std::make_exception_ptr(
          SolverError(fmt::format("transfer row for electrode {}: {}", e, err.what()), err.residual_history(), e));
    } catch (...) {
      errors[static_cast<std::size_t>(g)] = std::current_exception();
    }
  };
  if (outer) {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t g = 0; g < groups; ++g) run(g);
  } else {
    for (std::int64_t g = 0; g < groups; ++g) run(g);
  }
  for (const auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }

  TransferMatrix t;
  t.electrodes = e_count;
  t.reference = reference;
  t.dofs = n;
  t.rows.resize(rhs.size() * static_cast<std::size_t>(n));
  int max_it = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    std::copy(results[i].x.begin(), results[i].x.end(), t.rows.begin() + static_cast<std::ptrdiff_t>(i * n));
    t.residuals.push_back(results[i].relative_residual);
    t.iterations.push_back(results[i].iterations);
    max_it = std::max(max_it, results[i].iterations);
  }
  spdlog::info("transfer matrix: {} rows x {} dofs, at most {} iterations", rhs.size(), n, max_it);
  return t;
}

std::vector<double> apply_transfer(const TransferMatrix& t, std::span<const double> load) {
  if (load.size() != static_cast<std::size_t>(t.dofs)) {
    throw DomainError(fmt::format("load has {} entries but the transfer matrix has {} columns", load.size(), t.dofs));
  }
  // Source loads touch a few dozen DOFs; skipping zeros leaves every sum unchanged.
  std::vector<std::size_t> nz;
  for (std::size_t k = 0; k < load.size(); ++k) {
    if (load[k] != 0.0) nz.push_back(k);
  }
  std::vector<double> out(static_cast<std::size_t>(t.electrodes), 0.0);
  for (int i = 0; i < t.row_count(); ++i) {
    const auto r = t.row(i);
    double s = 0.0;
    for (const std::size_t k : nz) s += r[k] * load[k];
    out[static_cast<std::size_t>(t.electrode_of_row(i))] = s;
  }
  return out;
}

void write_transfer(const std::filesystem::path& path, const TransferMatrix& t, const std::string& tag) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot open {} for writing", path.string()));
  out << fmt::format("TRANSFER {} {} {}", t.electrodes, t.dofs, t.reference);
  if (!tag.empty()) out << ' ' << tag;
  out << '\n';
  out.write(reinterpret_cast<const char*>(t.rows.data()),
            static_cast<std::streamsize>(t.rows.size() * sizeof(double)));
  if (!out) throw IoError(fmt::format("failed writing {}", path.string()));
}

TransferMatrix read_transfer(const std::filesystem::path& path, std::string* tag) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  std::string header;
  std::getline(in, header);
  std::istringstream ss(header);
  std::string magic;
  TransferMatrix t;
  if (!(ss >> magic >> t.electrodes >> t.dofs >> t.reference) || magic != "TRANSFER" || t.electrodes < 2 ||
      t.dofs <= 0 || t.reference < 0 || t.reference >= t.electrodes) {
    throw IoError(fmt::format("{}: bad transfer header '{}'", path.string(), header));
  }
  std::string rest;
  ss >> rest;
  if (tag) *tag = rest;
  t.rows.resize(static_cast<std::size_t>(t.row_count()) * static_cast<std::size_t>(t.dofs));
  in.read(reinterpret_cast<char*>(t.rows.data()), static_cast<std::streamsize>(t.rows.size() * sizeof(double)));
  if (in.gcount() != static_cast<std::streamsize>(t.rows.size() * sizeof(double))) {
    throw IoError(fmt::format("{}: truncated transfer matrix data", path.string()));
  }
  t.residuals.assign(static_cast<std::size_t>(t.row_count()), 0.0);
  t.iterations.assign(static_cast<std::size_t>(t.row_count()), 0);
  return t;
}

}  // namespace cutfem
