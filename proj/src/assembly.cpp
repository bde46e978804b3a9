#include "cutfem/assembly.hpp"

#include <algorithm>
#include <cctype>
#include <exception>
#include <map>
#include <utility>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "cutfem/error.hpp"
#include "cutfem/quadrature.hpp"

namespace cutfem {

namespace {

template <class F>
std::vector<ElementBlock> collect(std::size_t n, F&& make, Execution exec) {
  std::vector<std::vector<ElementBlock>> per(n);
  if (exec == Execution::kParallel) {
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 64)
    for (std::int64_t k = 0; k < static_cast<std::int64_t>(n); ++k) {
      try {
        per[static_cast<std::size_t>(k)] = make(static_cast<std::size_t>(k));
      } catch (...) {
#pragma omp critical(cutfem_assembly_error)
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
  } else {
    for (std::size_t k = 0; k < n; ++k) per[k] = make(k);
  }
  std::size_t total = 0;
  for (const auto& p : per) total += p.size();
  std::vector<ElementBlock> out;
  out.reserve(total);
  for (auto& p : per) {
    for (auto& b : p) out.push_back(std::move(b));
  }
  return out;
}

void add_stiffness(Eigen::Matrix<double, 8, 8>& k, const Q1Values& q, const Mat3& sigma,
                   double w) {
  for (int b = 0; b < 8; ++b) {
    const Vec3 sg = w * (sigma * q.grad[b]);
    for (int a = 0; a < 8; ++a) k(a, b) += q.grad[a].dot(sg);
  }
}

}  // namespace

std::string_view to_string(NitscheVariant v) {
  return v == NitscheVariant::kSymmetric ? "swipg" : "nwipg";
}

NitscheVariant parse_nitsche_variant(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "nwipg") return NitscheVariant::kNonSymmetric;
  if (lower == "swipg") return NitscheVariant::kSymmetric;
  throw ConfigError(fmt::format("unknown interface coupling '{}' (expected nwipg or swipg)", name));
}

InterfaceWeights interface_weights(const Mat3& sigma_inner, const Mat3& sigma_outer,
                                   const Vec3& normal, double h) {
  const double de = normal.dot(sigma_inner * normal);
  const double df = normal.dot(sigma_outer * normal);
  if (!(de > 0.0) || !(df > 0.0)) throw DomainError("conductivity is not positive definite");
  InterfaceWeights w{};
  w.delta_inner = de;
  w.delta_outer = df;
  w.omega_inner = de / (de + df);
  w.omega_outer = df / (de + df);
  w.sigma_hat = 2.0 * de * df / (de + df);
  w.h_hat = h;
  w.nu = 1.0;
  return w;
}

Eigen::Matrix<double, 8, 8> reference_cell_matrix(const Mat3& sigma, double h) {
  Eigen::Matrix<double, 8, 8> k = Eigen::Matrix<double, 8, 8>::Zero();
  const Vec3 o = Vec3::Zero();
  for (const auto& qp : box_quadrature({o, Vec3::Constant(h)}, 2)) {
    add_stiffness(k, eval_q1(o, h, qp.point), sigma, qp.weight);
  }
  return k;
}

std::vector<ElementBlock> assemble_volume(const TrialSpace& space,
                                          const CutCellPartition& partition,
                                          const CompartmentModel& model, int order,
                                          Execution exec) {
  const auto& mesh = partition.mesh();
  const double h = mesh.h();
  const std::size_t m = model.size();
  std::vector<Eigen::Matrix<double, 8, 8>> reference(m);
  std::vector<std::pair<int, CellIndex>> items;
  for (std::size_t i = 0; i < m; ++i) {
    reference[i] = reference_cell_matrix(model[i].conductivity, h);
    for (CellIndex c : space.submesh(static_cast<int>(i))) items.emplace_back(static_cast<int>(i), c);
  }

  const auto make = [&](std::size_t k) {
    const auto [i, c] = items[k];
    const auto dofs = space.cell_dofs(i, c);
    ElementBlock block{{dofs.begin(), dofs.end()}, {}};
    const auto* cc = partition.cut(c);
    if (cc == nullptr) {
      block.values = reference[static_cast<std::size_t>(i)];
      return std::vector<ElementBlock>{std::move(block)};
    }
    const Mat3& sigma = model[static_cast<std::size_t>(i)].conductivity;
    const Vec3 origin = mesh.cell_origin(c);
    Eigen::Matrix<double, 8, 8> mat = Eigen::Matrix<double, 8, 8>::Zero();
    for (const auto& b : cc->boxes) {
      if (b.compartment != i) continue;
      for (const auto& qp : box_quadrature(b.box, 2)) {
        add_stiffness(mat, eval_q1(origin, h, qp.point), sigma, qp.weight);
      }
    }
    for (const auto& s : cc->snippets) {
      if (s.compartment != i) continue;
      for (const auto& qp : tet_quadrature(s.tet, order)) {
        add_stiffness(mat, eval_q1(origin, h, qp.point), sigma, qp.weight);
      }
    }
    block.values = mat;
    return std::vector<ElementBlock>{std::move(block)};
  };
  return collect(items.size(), make, exec);
}

std::vector<ElementBlock> assemble_nitsche(const TrialSpace& space,
                                           const CutCellPartition& partition,
                                           const CompartmentModel& model, double gamma,
                                           NitscheVariant variant, int order, Execution exec) {
  if (!(gamma > 0.0)) throw ConfigError("Nitsche penalty gamma must be positive");
  const auto& mesh = partition.mesh();
  const double h = mesh.h();
  const double s = variant == NitscheVariant::kSymmetric ? -1.0 : 1.0;
  const auto& cells = partition.cut_cells();

  const auto make = [&](std::size_t k) {
    const CutCell& cc = cells[k];
    const Vec3 origin = mesh.cell_origin(cc.cell);
    std::map<std::pair<int, int>, Eigen::Matrix<double, 16, 16>> blocks;
    for (const auto& f : cc.facets) {
      if (f.outer == kExterior) continue;
      auto [it, inserted] = blocks.try_emplace({f.inner, f.outer});
      if (inserted) it->second.setZero();
      auto& mat = it->second;
      const Mat3& si = model[static_cast<std::size_t>(f.inner)].conductivity;
      const Mat3& so = model[static_cast<std::size_t>(f.outer)].conductivity;
      const auto w = interface_weights(si, so, f.normal, h);
      const double pen = gamma * w.nu * w.sigma_hat / w.h_hat;
      const Vec3 fi = w.omega_inner * (si * f.normal);
      const Vec3 fo = w.omega_outer * (so * f.normal);
      for (const auto& qp : triangle_quadrature(f.tri, order)) {
        const auto q = eval_q1(origin, h, qp.point);
        std::array<double, 16> phi{};
        std::array<double, 16> sign{};
        std::array<double, 16> flux{};
        for (int a = 0; a < 8; ++a) {
          phi[a] = phi[a + 8] = q.value[a];
          sign[a] = 1.0;
          sign[a + 8] = -1.0;
          flux[a] = fi.dot(q.grad[a]);
          flux[a + 8] = fo.dot(q.grad[a]);
        }
        for (int u = 0; u < 16; ++u) {
          for (int t = 0; t < 16; ++t) {
            mat(t, u) += qp.weight * (-flux[u] * sign[t] * phi[t] + s * flux[t] * sign[u] * phi[u] +
                                      pen * sign[u] * sign[t] * phi[u] * phi[t]);
          }
        }
      }
    }
    std::vector<ElementBlock> out;
    for (auto& [pair, mat] : blocks) {
      const auto di = space.cell_dofs(pair.first, cc.cell);
      const auto dj = space.cell_dofs(pair.second, cc.cell);
      if (di[0] < 0 || dj[0] < 0) {
        spdlog::debug("cell {}: interface {}|{} borders a merged piece, skipped", cc.cell,
                      pair.first, pair.second);
        continue;
      }
      ElementBlock block;
      block.dofs.assign(di.begin(), di.end());
      block.dofs.insert(block.dofs.end(), dj.begin(), dj.end());
      block.values = mat;
      out.push_back(std::move(block));
    }
    return out;
  };
  return collect(cells.size(), make, exec);
}

std::vector<ElementBlock> assemble_ghost(const TrialSpace& space,
                                         const CutCellPartition& partition,
                                         const CompartmentModel& model, double ghost_gamma,
                                         Execution exec) {
  if (!(ghost_gamma >= 0.0)) throw ConfigError("ghost penalty gamma_G must be non-negative");
  if (ghost_gamma == 0.0) return {};
  const auto& mesh = partition.mesh();
  const double h = mesh.h();
  const auto& faces = partition.ghost_faces();
  const int m = static_cast<int>(model.size());

  const auto make = [&](std::size_t k) {
    const MeshFace& face = faces[k];
    const int d = face.axis;
    const Vec3 lo = mesh.cell_origin(face.lower);
    const Vec3 up = mesh.cell_origin(face.upper);
    const auto rule = face_quadrature(up, h, d, 2);
    // Local numbering: 8 corners of the lower cell, then the 4 corners of
    // the upper cell away from the shared face.
    std::array<int, 8> upper_local{};
    int next = 8;
    for (int b = 0; b < 8; ++b) {
      upper_local[b] = ((b >> d) & 1) ? next++ : (b | (1 << d));
    }
    std::vector<ElementBlock> out;
    for (int i = 0; i < m; ++i) {
      if (!partition.supports(face.lower, i) || !partition.supports(face.upper, i)) continue;
      const Mat3& sigma = model[static_cast<std::size_t>(i)].conductivity;
      Eigen::Matrix<double, 12, 12> mat = Eigen::Matrix<double, 12, 12>::Zero();
      for (const auto& qp : rule) {
        const auto ql = eval_q1(lo, h, qp.point);
        const auto qu = eval_q1(up, h, qp.point);
        std::array<Vec3, 12> jump;
        jump.fill(Vec3::Zero());
        for (int b = 0; b < 8; ++b) {
          jump[b] += ql.grad[b];
          jump[upper_local[b]] -= qu.grad[b];
        }
        std::array<double, 12> ju{};
        std::array<double, 12> jv{};
        for (int l = 0; l < 12; ++l) {
          ju[l] = (sigma * jump[l])[d];
          jv[l] = jump[l][d];
        }
        const double w = ghost_gamma * h * qp.weight;
        for (int u = 0; u < 12; ++u) {
          for (int t = 0; t < 12; ++t) mat(t, u) += w * jv[t] * ju[u];
        }
      }
      ElementBlock block;
      block.dofs.resize(12);
      const auto dl = space.cell_dofs(i, face.lower);
      const auto du = space.cell_dofs(i, face.upper);
      for (int b = 0; b < 8; ++b) {
        block.dofs[b] = dl[b];
        if ((b >> d) & 1) block.dofs[upper_local[b]] = du[b];
      }
      block.values = mat;
      out.push_back(std::move(block));
    }
    return out;
  };
  return collect(faces.size(), make, exec);
}

CsrMatrix scatter(Dof size, std::span<const std::vector<ElementBlock>* const> groups) {
  std::vector<std::vector<std::int32_t>> rows(static_cast<std::size_t>(size));
  for (const auto* g : groups) {
    for (const auto& b : *g) {
      for (Dof r : b.dofs) {
        auto& row = rows[static_cast<std::size_t>(r)];
        row.insert(row.end(), b.dofs.begin(), b.dofs.end());
      }
    }
  }
  for (auto& row : rows) {
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    row.shrink_to_fit();
  }
  CsrMatrix k = CsrMatrix::from_pattern(size, rows);
  rows.clear();
  rows.shrink_to_fit();
  for (const auto* g : groups) {
    for (const auto& b : *g) {
      const auto n = static_cast<Eigen::Index>(b.dofs.size());
      for (Eigen::Index t = 0; t < n; ++t) {
        for (Eigen::Index u = 0; u < n; ++u) {
          k.add(b.dofs[static_cast<std::size_t>(t)], b.dofs[static_cast<std::size_t>(u)],
                b.values(t, u));
        }
      }
    }
  }
  return k;
}

SparseSystem assemble_system(const TrialSpace& space, const CutCellPartition& partition,
                             const CompartmentModel& model, const AssemblyOptions& options,
                             Execution exec) {
  if (!(options.gamma > 0.0)) throw ConfigError("Nitsche penalty gamma must be positive");
  if (!(options.ghost_gamma >= 0.0)) throw ConfigError("ghost penalty gamma_G must be non-negative");
  const auto volume = assemble_volume(space, partition, model, options.volume_order, exec);
  const auto nitsche = assemble_nitsche(space, partition, model, options.gamma, options.variant,
                                        options.facet_order, exec);
  const auto ghost = assemble_ghost(space, partition, model, options.ghost_gamma, exec);
  const std::array<const std::vector<ElementBlock>*, 3> groups{&volume, &nitsche, &ghost};
  SparseSystem sys;
  sys.stiffness = scatter(space.size(), groups);
  sys.variant = options.variant;
  sys.gamma = options.gamma;
  sys.ghost_gamma = options.ghost_gamma;
  return sys;
}

std::vector<double> assemble_load(const TrialSpace& space, const CutCellPartition& partition,
                                  std::span<const Monopole> monopoles, int compartment) {
  const auto& mesh = partition.mesh();
  std::vector<double> load(static_cast<std::size_t>(space.size()), 0.0);
  for (const auto& mp : monopoles) {
    const CellIndex c = mesh.locate(mp.position);
    if (c < 0 || partition.label(mp.position) != compartment) {
      throw DomainError(fmt::format("monopole at ({:.6g}, {:.6g}, {:.6g}) lies outside compartment {}",
                                    mp.position.x(), mp.position.y(), mp.position.z(),
                                    compartment));
    }
    const auto dofs = space.cell_dofs(compartment, c);
    const auto q = eval_q1(mesh.cell_origin(c), mesh.h(), mp.position);
    for (int a = 0; a < 8; ++a) {
      if (q.value[a] != 0.0) load[static_cast<std::size_t>(dofs[a])] += mp.charge * q.value[a];
    }
  }
  return load;
}

}  // namespace cutfem
