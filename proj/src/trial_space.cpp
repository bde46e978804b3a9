#include "cutfem/trial_space.hpp"

#include <algorithm>

#include "cutfem/error.hpp"

namespace cutfem {

TrialSpace::TrialSpace(const BackgroundMesh& mesh, std::vector<std::vector<CellIndex>> submeshes)
    : mesh_(mesh), submeshes_(std::move(submeshes)) {
  const auto nverts = static_cast<std::size_t>(mesh_.vertex_count());
  dof_of_vertex_.assign(submeshes_.size(), std::vector<Dof>(nverts, -1));
  for (std::size_t i = 0; i < submeshes_.size(); ++i) {
    auto& map = dof_of_vertex_[i];
    std::vector<char> used(nverts, 0);
    for (CellIndex c : submeshes_[i]) {
      for (VertexIndex v : mesh_.cell_vertices(c)) used[static_cast<std::size_t>(v)] = 1;
    }
    for (std::size_t v = 0; v < nverts; ++v) {
      if (!used[v]) continue;
      if (owners_.size() >= static_cast<std::size_t>(INT32_MAX)) {
        throw ConfigError("trial space exceeds the 32-bit DOF index range");
      }
      map[v] = static_cast<Dof>(owners_.size());
      owners_.push_back({static_cast<int>(i), static_cast<VertexIndex>(v)});
    }
  }
}

std::array<Dof, 8> TrialSpace::cell_dofs(int compartment, CellIndex cell) const {
  const auto verts = mesh_.cell_vertices(cell);
  std::array<Dof, 8> d{};
  for (int a = 0; a < 8; ++a) d[a] = dof(compartment, verts[a]);
  return d;
}

Dof TrialSpace::compartment_size(int compartment) const {
  return static_cast<Dof>(std::count_if(owners_.begin(), owners_.end(), [&](const DofOwner& o) {
    return o.compartment == compartment;
  }));
}

TrialSpace build_trial_space(const BackgroundMesh& mesh,
                             std::vector<std::vector<CellIndex>> submeshes) {
  for (const auto& s : submeshes) {
    if (s.empty()) throw ConfigError("cannot build a trial space on an empty submesh");
  }
  return TrialSpace(mesh, std::move(submeshes));
}

Q1Values eval_q1(const Vec3& cell_origin, double h, const Vec3& p) {
  const Vec3 xi = (p - cell_origin) / h;
  Q1Values q{};
  for (int a = 0; a < 8; ++a) {
    std::array<double, 3> f{};
    std::array<double, 3> df{};
    for (int d = 0; d < 3; ++d) {
      const bool upper = (a >> d) & 1;
      f[d] = upper ? xi[d] : 1.0 - xi[d];
      df[d] = (upper ? 1.0 : -1.0) / h;
    }
    q.value[a] = f[0] * f[1] * f[2];
    q.grad[a] = Vec3(df[0] * f[1] * f[2], f[0] * df[1] * f[2], f[0] * f[1] * df[2]);
  }
  return q;
}

}  // namespace cutfem
