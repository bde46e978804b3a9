#ifndef CUTFEM_SOURCES_HPP
#define CUTFEM_SOURCES_HPP

#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "cutfem/assembly.hpp"
#include "cutfem/model.hpp"
#include "cutfem/partition.hpp"

namespace cutfem {

struct Dipole {
  Vec3 position;  // mm
  Vec3 moment;    // nAm
};

enum class VenantNeighborhood { kCell, kCellAndFaceNeighbors };

std::string_view to_string(VenantNeighborhood n);
VenantNeighborhood parse_venant_neighborhood(std::string_view name);

struct VenantConfig {
  int order = 2;            // highest monomial moment matched
  double lambda = 1e-6;     // Tikhonov weight on the charges
  int quadrature_order = 2; // Gauss-Legendre points per axis (boxes) or degree (tets)
  VenantNeighborhood neighborhood = VenantNeighborhood::kCellAndFaceNeighbors;
};

/// Monopoles reproducing the dipole: zero total charge and first moment equal
/// to the dipole moment (both enforced exactly), higher moments driven to zero
/// in the least-squares sense. Sites are quadrature points of the source
/// compartment's pieces in the containing cell and, optionally, its face
/// neighbours.
std::vector<Monopole> venant_monopoles(const Dipole& dipole, const CutCellPartition& partition,
                                       const CompartmentModel& model, int compartment,
                                       const VenantConfig& config = {});

struct GridSource {
  Vec3 position;
  double depth = 0.0;          // -Phi of the source compartment
  bool near_boundary = false;  // depth < h
};

/// Points of the lattice anchor + spacing * Z^3 inside the mesh whose
/// containing piece belongs to the compartment and where its level set is
/// negative. Throws DomainError when none remain.
std::vector<GridSource> source_grid(const CutCellPartition& partition, const CompartmentModel& model,
                                    int compartment, double spacing, const Vec3& anchor);
std::vector<GridSource> source_grid(const CutCellPartition& partition, const CompartmentModel& model,
                                    int compartment, double spacing);

/// ASCII dipoles, one `x y z [mx my mz]` per line (missing moments are zero).
std::vector<Dipole> read_dipoles(const std::filesystem::path& path);
void write_dipoles(const std::filesystem::path& path, std::span<const Dipole> dipoles);

}  // namespace cutfem

#endif
