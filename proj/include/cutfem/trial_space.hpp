#ifndef CUTFEM_TRIAL_SPACE_HPP
#define CUTFEM_TRIAL_SPACE_HPP

#include <array>
#include <cstdint>
#include <vector>

#include "cutfem/model.hpp"

namespace cutfem {

using Dof = std::int32_t;

struct DofOwner {
  int compartment;
  VertexIndex vertex;
};

/// Direct sum of conforming Q1 spaces, one per compartment submesh. A
/// background vertex shared by k submeshes carries k distinct DOFs. DOFs are
/// numbered compartment by compartment, vertices ascending.
class TrialSpace {
 public:
  TrialSpace() = default;
  TrialSpace(const BackgroundMesh& mesh, std::vector<std::vector<CellIndex>> submeshes);

  Dof size() const { return static_cast<Dof>(owners_.size()); }
  std::size_t compartment_count() const { return submeshes_.size(); }
  const BackgroundMesh& mesh() const { return mesh_; }
  const std::vector<CellIndex>& submesh(int compartment) const {
    return submeshes_[static_cast<std::size_t>(compartment)];
  }

  /// DOF of (compartment, vertex), or -1 if the vertex is not in the submesh.
  Dof dof(int compartment, VertexIndex vertex) const {
    return dof_of_vertex_[static_cast<std::size_t>(compartment)][static_cast<std::size_t>(vertex)];
  }
  const DofOwner& owner(Dof d) const { return owners_[static_cast<std::size_t>(d)]; }

  /// Corner DOFs of a submesh cell, in BackgroundMesh::cell_vertices order.
  std::array<Dof, 8> cell_dofs(int compartment, CellIndex cell) const;

  /// Number of DOFs owned by one compartment.
  Dof compartment_size(int compartment) const;

 private:
  BackgroundMesh mesh_;
  std::vector<std::vector<CellIndex>> submeshes_;
  std::vector<std::vector<Dof>> dof_of_vertex_;
  std::vector<DofOwner> owners_;
};

TrialSpace build_trial_space(const BackgroundMesh& mesh,
                             std::vector<std::vector<CellIndex>> submeshes);

/// Values and gradients of the eight trilinear basis functions of a cell.
struct Q1Values {
  std::array<double, 8> value;
  std::array<Vec3, 8> grad;
};

Q1Values eval_q1(const Vec3& cell_origin, double h, const Vec3& p);

}  // namespace cutfem

#endif
