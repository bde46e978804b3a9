#include "cutfem/krylov.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include <fmt/format.h>

#include "cutfem/error.hpp"

namespace cutfem {

namespace {

// Dot products are summed in fixed row chunks so the result does not depend
// on the thread count.
constexpr std::int64_t kChunk = 2048;
constexpr int kMaxRestarts = 50;

using Mask = std::vector<char>;

void block_dots(std::span<const double> a, std::span<const double> b, int k, std::vector<double>& out,
                Execution exec) {
  const auto kk = static_cast<std::size_t>(k);
  const auto n = static_cast<std::int64_t>(a.size() / kk);
  const std::int64_t chunks = (n + kChunk - 1) / kChunk;
  std::vector<double> part(static_cast<std::size_t>(chunks) * kk, 0.0);
  const auto chunk = [&](std::int64_t c) {
    double* acc = &part[static_cast<std::size_t>(c) * kk];
    const std::int64_t end = std::min(n, (c + 1) * kChunk);
    for (std::int64_t i = c * kChunk; i < end; ++i) {
      const std::size_t base = static_cast<std::size_t>(i) * kk;
      for (std::size_t j = 0; j < kk; ++j) acc[j] += a[base + j] * b[base + j];
    }
  };
  if (exec == Execution::kParallel) {
#pragma omp parallel for schedule(static)
    for (std::int64_t c = 0; c < chunks; ++c) chunk(c);
  } else {
    for (std::int64_t c = 0; c < chunks; ++c) chunk(c);
  }
  out.assign(kk, 0.0);
  for (std::int64_t c = 0; c < chunks; ++c) {
    for (std::size_t j = 0; j < kk; ++j) out[j] += part[static_cast<std::size_t>(c) * kk + j];
  }
}

// Applies f(i, j) to every row i and every active column j.
template <class F>
void for_active(std::int64_t n, const Mask& active, Execution exec, F&& f) {
  const auto k = static_cast<int>(active.size());
  const auto row = [&](std::int64_t i) {
    for (int j = 0; j < k; ++j) {
      if (active[static_cast<std::size_t>(j)]) f(static_cast<std::size_t>(i) * k + j, j);
    }
  };
  if (exec == Execution::kParallel) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) row(i);
  } else {
    for (std::int64_t i = 0; i < n; ++i) row(i);
  }
}

std::vector<double> column(const std::vector<double>& block, int k, int j) {
  const std::size_t n = block.size() / static_cast<std::size_t>(k);
  std::vector<double> c(n);
  for (std::size_t i = 0; i < n; ++i) c[i] = block[i * k + j];
  return c;
}

class BlockSolver {
 public:
  BlockSolver(const CsrMatrix& k, const std::vector<std::vector<double>>& loads,
              const SolverOptions& opt)
      : k_(k), opt_(opt), m_(k, opt.preconditioner), cols_(static_cast<int>(loads.size())),
        n_(k.rows()), results_(loads.size()) {
    const auto size = static_cast<std::size_t>(n_) * cols_;
    b_.assign(size, 0.0);
    for (int j = 0; j < cols_; ++j) {
      for (std::int64_t i = 0; i < n_; ++i) b_[i * cols_ + j] = loads[static_cast<std::size_t>(j)][i];
    }
    std::vector<double> bb;
    block_dots(b_, b_, cols_, bb, opt_.exec);
    bnorm_.resize(static_cast<std::size_t>(cols_));
    active_.assign(static_cast<std::size_t>(cols_), 1);
    for (int j = 0; j < cols_; ++j) {
      bnorm_[j] = std::sqrt(bb[j]);
      if (bnorm_[j] == 0.0) active_[j] = 0;
    }
    x_.assign(size, 0.0);
  }

  std::vector<SolveResult> run_cg();
  std::vector<SolveResult> run_bicgstab();

 private:
  void spmv(const std::vector<double>& in, std::vector<double>& out) const {
    k_.multiply_block(in, out, cols_, opt_.exec);
  }
  void precondition(const std::vector<double>& r, std::vector<double>& z) const {
    m_.apply(r, z, cols_);
  }
  bool any_active() const {
    return std::any_of(active_.begin(), active_.end(), [](char a) { return a != 0; });
  }
  // Writes the true residual of column j into r and returns its relative norm.
  double true_residual(int j, std::vector<double>& r) const {
    const auto xj = column(x_, cols_, j);
    std::vector<double> kx(xj.size());
    k_.multiply(xj, kx, opt_.exec);
    double s = 0.0;
    for (std::int64_t i = 0; i < n_; ++i) {
      const double v = b_[i * cols_ + j] - kx[static_cast<std::size_t>(i)];
      r[i * cols_ + j] = v;
      s += v * v;
    }
    return std::sqrt(s) / bnorm_[j];
  }
  // True residual of column j; replaces the recursive one when it drifted.
  bool confirm(int j, std::vector<double>& r) {
    const double rel = true_residual(j, r);
    auto& res = results_[static_cast<std::size_t>(j)];
    if (rel <= opt_.tolerance) {
      res.relative_residual = rel;
      active_[j] = 0;
      return true;
    }
    res.history.push_back(rel);
    return false;
  }
  std::vector<SolveResult> finish(const char* method) {
    for (int j = 0; j < cols_; ++j) {
      auto& res = results_[static_cast<std::size_t>(j)];
      if (active_[j]) {
        throw SolverError(fmt::format("{} did not reach relative residual {:.3g} in {} iterations "
                                      "(right-hand side {}, last residual {:.3g})",
                                      method, opt_.tolerance, opt_.max_iterations, j,
                                      res.history.empty() ? 1.0 : res.history.back()),
                          res.history, j);
      }
      res.x = column(x_, cols_, j);
      double mean = 0.0;
      for (double v : res.x) mean += v;
      mean /= static_cast<double>(res.x.size());
      for (double& v : res.x) v -= mean;
    }
    return std::move(results_);
  }

  const CsrMatrix& k_;
  SolverOptions opt_;
  PreconditionerOp m_;
  int cols_;
  std::int64_t n_;
  std::vector<SolveResult> results_;
  std::vector<double> b_;
  std::vector<double> x_;
  std::vector<double> bnorm_;
  Mask active_;
};

std::vector<SolveResult> BlockSolver::run_cg() {
  const auto size = x_.size();
  std::vector<double> r = b_;
  std::vector<double> z(size);
  std::vector<double> p(size);
  std::vector<double> q(size);
  std::vector<double> rz;
  std::vector<double> pq;
  std::vector<double> rr;
  std::vector<double> rz_new;
  Mask restart(static_cast<std::size_t>(cols_), 0);
  precondition(r, z);
  p = z;
  block_dots(r, z, cols_, rz, opt_.exec);

  for (int it = 1; it <= opt_.max_iterations && any_active(); ++it) {
    spmv(p, q);
    block_dots(p, q, cols_, pq, opt_.exec);
    std::vector<double> alpha(static_cast<std::size_t>(cols_), 0.0);
    for (int j = 0; j < cols_; ++j) {
      if (active_[j]) alpha[j] = rz[j] / pq[j];
    }
    for_active(n_, active_, opt_.exec, [&](std::size_t e, int j) {
      x_[e] += alpha[j] * p[e];
      r[e] -= alpha[j] * q[e];
    });
    block_dots(r, r, cols_, rr, opt_.exec);
    for (int j = 0; j < cols_; ++j) {
      if (!active_[j]) continue;
      auto& res = results_[static_cast<std::size_t>(j)];
      res.iterations = it;
      const double rel = std::sqrt(rr[j]) / bnorm_[j];
      res.history.push_back(rel);
      restart[j] = 0;
      if (!std::isfinite(rel)) {
        throw SolverError(fmt::format("conjugate gradients broke down (right-hand side {})", j),
                          res.history, j);
      }
      if (rel <= opt_.tolerance && !confirm(j, r)) restart[j] = 1;
    }
    if (!any_active()) break;
    precondition(r, z);
    block_dots(r, z, cols_, rz_new, opt_.exec);
    std::vector<double> beta(static_cast<std::size_t>(cols_), 0.0);
    for (int j = 0; j < cols_; ++j) {
      if (active_[j] && !restart[j]) beta[j] = rz_new[j] / rz[j];
    }
    for_active(n_, active_, opt_.exec, [&](std::size_t e, int j) { p[e] = z[e] + beta[j] * p[e]; });
    rz = rz_new;
  }
  return finish("conjugate gradients");
}

std::vector<SolveResult> BlockSolver::run_bicgstab() {
  const auto size = x_.size();
  const auto kc = static_cast<std::size_t>(cols_);
  std::vector<double> r = b_;
  std::vector<double> rhat = b_;
  std::vector<double> p(size, 0.0);
  std::vector<double> v(size, 0.0);
  std::vector<double> phat(size);
  std::vector<double> s(size);
  std::vector<double> shat(size);
  std::vector<double> t(size);
  std::vector<double> rho(kc, 1.0);
  std::vector<double> alpha(kc, 1.0);
  std::vector<double> omega(kc, 1.0);
  std::vector<double> beta(kc, 0.0);
  std::vector<double> rho_new;
  std::vector<double> rv;
  std::vector<double> ss;
  std::vector<double> ts;
  std::vector<double> tt;
  std::vector<double> rr;
  Mask half(kc, 0);

  std::vector<double> rhat_norm(kc);
  std::vector<int> restarts(kc, 0);
  for (int j = 0; j < cols_; ++j) rhat_norm[j] = bnorm_[j];

  // Fresh shadow vector from the current residual.
  const auto reset = [&](int j) {
    double sum = 0.0;
    for (std::int64_t i = 0; i < n_; ++i) {
      const auto e = static_cast<std::size_t>(i) * kc + j;
      rhat[e] = r[e];
      p[e] = 0.0;
      v[e] = 0.0;
      sum += r[e] * r[e];
    }
    rhat_norm[j] = std::sqrt(sum);
    rho[j] = alpha[j] = omega[j] = 1.0;
  };
  const auto fail = [&](int j, const char* why) {
    auto& res = results_[static_cast<std::size_t>(j)];
    throw SolverError(fmt::format("BiCGstab breakdown: {} (right-hand side {})", why, j), res.history, j);
  };

  for (int it = 1; it <= opt_.max_iterations && any_active(); ++it) {
    block_dots(rhat, r, cols_, rho_new, opt_.exec);
    block_dots(r, r, cols_, rr, opt_.exec);
    for (int j = 0; j < cols_; ++j) {
      if (!active_[j]) continue;
      if (!std::isfinite(rho_new[j])) fail(j, "rho is not finite");
      if (std::abs(rho_new[j]) <= 1e-14 * rhat_norm[j] * std::sqrt(rr[j])) {
        // Shadow residual became orthogonal to the residual: restart from
        // the true residual.
        if (++restarts[j] > kMaxRestarts) fail(j, "rho vanished repeatedly");
        const double rel = true_residual(j, r);
        auto& res = results_[static_cast<std::size_t>(j)];
        res.history.push_back(rel);
        if (rel <= opt_.tolerance) {
          res.relative_residual = rel;
          active_[j] = 0;
          continue;
        }
        reset(j);
        rho_new[j] = rhat_norm[j] * rhat_norm[j];
      }
      beta[j] = (rho_new[j] / rho[j]) * (alpha[j] / omega[j]);
    }
    if (!any_active()) break;
    for_active(n_, active_, opt_.exec, [&](std::size_t e, int j) {
      p[e] = r[e] + beta[j] * (p[e] - omega[j] * v[e]);
    });
    precondition(p, phat);
    spmv(phat, v);
    block_dots(rhat, v, cols_, rv, opt_.exec);
    for (int j = 0; j < cols_; ++j) {
      if (!active_[j]) continue;
      if (rv[j] == 0.0 || !std::isfinite(rv[j])) fail(j, "projection vanished");
      alpha[j] = rho_new[j] / rv[j];
    }
    for_active(n_, active_, opt_.exec, [&](std::size_t e, int j) { s[e] = r[e] - alpha[j] * v[e]; });
    block_dots(s, s, cols_, ss, opt_.exec);

    // Columns whose intermediate residual already converged take the half step.
    for (int j = 0; j < cols_; ++j) {
      half[j] = 0;
      if (!active_[j]) continue;
      results_[static_cast<std::size_t>(j)].iterations = it;
      if (std::sqrt(ss[j]) / bnorm_[j] <= opt_.tolerance) half[j] = 1;
    }
    for_active(n_, half, opt_.exec, [&](std::size_t e, int j) { x_[e] += alpha[j] * phat[e]; });
    for (int j = 0; j < cols_; ++j) {
      if (!half[j]) continue;
      auto& res = results_[static_cast<std::size_t>(j)];
      res.history.push_back(std::sqrt(ss[j]) / bnorm_[j]);
      for (std::int64_t i = 0; i < n_; ++i) r[static_cast<std::size_t>(i) * kc + j] = s[static_cast<std::size_t>(i) * kc + j];
      if (!confirm(j, r)) reset(j);
    }
    Mask full(kc, 0);
    for (int j = 0; j < cols_; ++j) full[j] = active_[j] && !half[j];
    if (std::none_of(full.begin(), full.end(), [](char a) { return a != 0; })) continue;

    precondition(s, shat);
    spmv(shat, t);
    block_dots(t, s, cols_, ts, opt_.exec);
    block_dots(t, t, cols_, tt, opt_.exec);
    for (int j = 0; j < cols_; ++j) {
      if (!full[j]) continue;
      if (tt[j] == 0.0 || !std::isfinite(tt[j])) fail(j, "stabilisation step vanished");
      omega[j] = ts[j] / tt[j];
      if (omega[j] == 0.0) fail(j, "omega vanished");
    }
    for_active(n_, full, opt_.exec, [&](std::size_t e, int j) {
      x_[e] += alpha[j] * phat[e] + omega[j] * shat[e];
      r[e] = s[e] - omega[j] * t[e];
    });
    block_dots(r, r, cols_, rr, opt_.exec);
    for (int j = 0; j < cols_; ++j) {
      if (!full[j]) continue;
      rho[j] = rho_new[j];
      auto& res = results_[static_cast<std::size_t>(j)];
      const double rel = std::sqrt(rr[j]) / bnorm_[j];
      res.history.push_back(rel);
      if (!std::isfinite(rel)) fail(j, "residual is not finite");
      if (rel <= opt_.tolerance && !confirm(j, r)) reset(j);
    }
  }
  return finish("BiCGstab");
}

}  // namespace

std::string_view to_string(Preconditioner p) {
  return p == Preconditioner::kJacobi ? "jacobi" : "sgs";
}

Preconditioner parse_preconditioner(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "jacobi") return Preconditioner::kJacobi;
  if (lower == "sgs") return Preconditioner::kSymmetricGaussSeidel;
  throw ConfigError(fmt::format("unknown preconditioner '{}' (expected jacobi or sgs)", name));
}

PreconditionerOp::PreconditionerOp(const CsrMatrix& k, Preconditioner kind)
    : matrix_(k), kind_(kind) {
  const auto d = k.diagonal();
  inv_diag_.resize(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] == 0.0) throw DomainError(fmt::format("zero diagonal entry in row {}", i));
    inv_diag_[i] = 1.0 / d[i];
  }
}

void PreconditionerOp::apply(std::span<const double> r, std::span<double> z, int k) const {
  const auto kk = static_cast<std::size_t>(k);
  const auto n = static_cast<std::int64_t>(inv_diag_.size());
  if (kind_ == Preconditioner::kJacobi) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < kk; ++j) z[i * kk + j] = inv_diag_[i] * r[i * kk + j];
    }
    return;
  }
  // (D + L) D^{-1} (D + U) z = r: forward sweep, diagonal scaling, backward sweep.
  const auto& ptr = matrix_.row_ptr();
  const auto& col = matrix_.col_idx();
  const auto& val = matrix_.values();
  std::vector<double> acc(kk);
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < kk; ++j) acc[j] = r[i * kk + j];
    for (auto e = ptr[i]; e < ptr[i + 1] && col[e] < i; ++e) {
      for (std::size_t j = 0; j < kk; ++j) acc[j] -= val[e] * z[col[e] * kk + j];
    }
    for (std::size_t j = 0; j < kk; ++j) z[i * kk + j] = acc[j] * inv_diag_[i];
  }
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < kk; ++j) z[i * kk + j] /= inv_diag_[i];
  }
  for (std::int64_t i = n - 1; i >= 0; --i) {
    for (std::size_t j = 0; j < kk; ++j) acc[j] = z[i * kk + j];
    for (auto e = ptr[i + 1] - 1; e >= ptr[i] && col[e] > i; --e) {
      for (std::size_t j = 0; j < kk; ++j) acc[j] -= val[e] * z[col[e] * kk + j];
    }
    for (std::size_t j = 0; j < kk; ++j) z[i * kk + j] = acc[j] * inv_diag_[i];
  }
}

std::vector<double> make_compatible(std::span<const double> load) {
  double sum = 0.0;
  double l1 = 0.0;
  for (double v : load) {
    sum += v;
    l1 += std::abs(v);
  }
  if (std::abs(sum) > 1e-10 * l1) {
    throw DomainError(fmt::format("incompatible Neumann load: sum {:.3e} exceeds 1e-10 of its 1-norm {:.3e}",
                                  sum, l1));
  }
  std::vector<double> f(load.begin(), load.end());
  if (!f.empty()) {
    const double mean = sum / static_cast<double>(f.size());
    for (double& v : f) v -= mean;
  }
  return f;
}

std::vector<SolveResult> solve_block(const SparseSystem& system,
                                     const std::vector<std::vector<double>>& loads,
                                     const SolverOptions& options) {
  const auto& k = system.stiffness;
  if (options.tolerance <= 0.0 || options.max_iterations <= 0 || options.block_size <= 0) {
    throw ConfigError("solver tolerance, iteration limit and block size must be positive");
  }
  std::vector<SolveResult> out;
  out.reserve(loads.size());
  const auto bs = static_cast<std::size_t>(options.block_size);
  for (std::size_t start = 0; start < loads.size(); start += bs) {
    const std::size_t end = std::min(loads.size(), start + bs);
    std::vector<std::vector<double>> group;
    for (std::size_t j = start; j < end; ++j) {
      if (loads[j].size() != static_cast<std::size_t>(k.rows())) {
        throw DomainError("load vector length does not match the system size");
      }
      group.push_back(make_compatible(loads[j]));
    }
    BlockSolver solver(k, group, options);
    try {
      auto res = system.symmetric() ? solver.run_cg() : solver.run_bicgstab();
      for (auto& r : res) out.push_back(std::move(r));
    } catch (const SolverError& e) {
      throw SolverError(e.what(), e.residual_history(), static_cast<int>(start) + e.rhs_index());
    }
  }
  return out;
}

SolveResult solve(const SparseSystem& system, std::span<const double> load,
                  const SolverOptions& options) {
  SolverOptions single = options;
  single.block_size = 1;
  auto res = solve_block(system, {std::vector<double>(load.begin(), load.end())}, single);
  return std::move(res.front());
}

}  // namespace cutfem
