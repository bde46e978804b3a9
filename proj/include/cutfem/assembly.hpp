#ifndef CUTFEM_ASSEMBLY_HPP
#define CUTFEM_ASSEMBLY_HPP

#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "cutfem/model.hpp"
#include "cutfem/parallel.hpp"
#include "cutfem/partition.hpp"
#include "cutfem/sparse.hpp"
#include "cutfem/trial_space.hpp"

namespace cutfem {

/// Non-symmetric (NWIPG) or symmetric (SWIPG) weighted interior penalty
/// coupling across compartment interfaces.
enum class NitscheVariant { kNonSymmetric, kSymmetric };

std::string_view to_string(NitscheVariant v);
NitscheVariant parse_nitsche_variant(std::string_view name);

/// Dense element matrix over a list of global DOFs (rows and columns share it).
struct ElementBlock {
  std::vector<Dof> dofs;
  Eigen::MatrixXd values;
};

struct InterfaceWeights {
  double omega_inner;
  double omega_outer;
  double delta_inner;  // S/m
  double delta_outer;
  double sigma_hat;    // S/m
  double h_hat;        // mm
  double nu;
};

/// Weights for a facet with unit normal n pointing from the inner into the
/// outer compartment.
InterfaceWeights interface_weights(const Mat3& sigma_inner, const Mat3& sigma_outer,
                                   const Vec3& normal, double h);

struct AssemblyOptions {
  NitscheVariant variant = NitscheVariant::kNonSymmetric;
  double gamma = 16.0;
  double ghost_gamma = 0.1;
  int volume_order = 4;
  int facet_order = 5;
};

struct SparseSystem {
  CsrMatrix stiffness;
  NitscheVariant variant = NitscheVariant::kNonSymmetric;
  double gamma = 0.0;
  double ghost_gamma = 0.0;

  bool symmetric() const { return variant == NitscheVariant::kSymmetric; }
};

/// Stiffness matrix of a full cell for conductivity sigma; corner order as in
/// BackgroundMesh::cell_vertices.
Eigen::Matrix<double, 8, 8> reference_cell_matrix(const Mat3& sigma, double h);

std::vector<ElementBlock> assemble_volume(const TrialSpace& space,
                                          const CutCellPartition& partition,
                                          const CompartmentModel& model, int order = 4,
                                          Execution exec = Execution::kParallel);

std::vector<ElementBlock> assemble_nitsche(const TrialSpace& space,
                                           const CutCellPartition& partition,
                                           const CompartmentModel& model, double gamma,
                                           NitscheVariant variant, int order = 5,
                                           Execution exec = Execution::kParallel);

std::vector<ElementBlock> assemble_ghost(const TrialSpace& space,
                                         const CutCellPartition& partition,
                                         const CompartmentModel& model, double ghost_gamma,
                                         Execution exec = Execution::kParallel);

/// Sums element blocks into a CSR matrix. Accumulation follows list order, so
/// the result does not depend on the thread count.
CsrMatrix scatter(Dof size, std::span<const std::vector<ElementBlock>* const> groups);

SparseSystem assemble_system(const TrialSpace& space, const CutCellPartition& partition,
                             const CompartmentModel& model, const AssemblyOptions& options = {},
                             Execution exec = Execution::kParallel);

struct Monopole {
  Vec3 position;
  double charge;
};

/// Right-hand side for point charges located in `compartment`.
std::vector<double> assemble_load(const TrialSpace& space, const CutCellPartition& partition,
                                  std::span<const Monopole> monopoles, int compartment);

}  // namespace cutfem

#endif
