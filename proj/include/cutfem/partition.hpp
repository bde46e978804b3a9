#ifndef CUTFEM_PARTITION_HPP
#define CUTFEM_PARTITION_HPP

#include <cstdint>
#include <vector>

#include "cutfem/model.hpp"
#include "cutfem/parallel.hpp"
#include "cutfem/quadrature.hpp"

namespace cutfem {

/// Label of the region outside every compartment.
inline constexpr int kExterior = -1;

enum class CellKind : std::uint8_t { kExterior, kInterior, kCut };

struct CellClass {
  CellKind kind = CellKind::kExterior;
  int compartment = kExterior;  // meaningful for kInterior only
};

/// Single-compartment tetrahedral piece of a cut cell.
struct Snippet {
  Tetrahedron tet;
  int compartment;
};

/// Uncut dyadic sub-cell of a cut cell, entirely inside one compartment.
struct SnippetBox {
  Box box;
  int compartment;
};

/// Piece of the interface between compartment `inner` and compartment
/// `outer` (inner < outer, or outer == kExterior on the head boundary).
/// The unit normal points from inner toward outer.
struct InterfaceFacet {
  Triangle tri;
  Vec3 normal;
  int inner;
  int outer;
};

struct CutCell {
  CellIndex cell = -1;
  std::vector<Snippet> snippets;
  std::vector<SnippetBox> boxes;
  std::vector<InterfaceFacet> facets;
  std::vector<double> volume;  // per compartment
  double exterior_volume = 0.0;
  int merged = 0;              // degenerate pieces absorbed into a neighbour

  bool has(int compartment) const {
    return compartment >= 0 && compartment < static_cast<int>(volume.size()) &&
           volume[compartment] > 0.0;
  }
};

/// Interior face of the background mesh; `lower` is the cell on the negative
/// side along `axis`.
struct MeshFace {
  CellIndex lower;
  CellIndex upper;
  int axis;

  friend bool operator==(const MeshFace&, const MeshFace&) = default;
};

struct CutOptions {
  int refinement = 1;             // dyadic sub-cell levels applied inside cut cells, 0..3
  int classify_levels = 1;        // dyadic sample levels used to detect cut cells
  double min_volume = 1e-12;      // relative to h^3; smaller pieces are merged
  double bisection_tol = 1e-10;   // relative to h
};

class CutCellPartition {
 public:
  CutCellPartition() = default;
  CutCellPartition(BackgroundMesh mesh, std::size_t compartments, std::vector<CellClass> classes,
                   std::vector<CutCell> cut_cells, std::vector<MeshFace> ghost_faces);

  const BackgroundMesh& mesh() const { return mesh_; }
  std::size_t compartment_count() const { return compartments_; }
  const CellClass& cell_class(CellIndex c) const { return classes_[static_cast<std::size_t>(c)]; }
  const std::vector<CutCell>& cut_cells() const { return cut_cells_; }

  /// Cut-cell record of cell c, or nullptr if c is not cut.
  const CutCell* cut(CellIndex c) const {
    const auto slot = cut_slot_[static_cast<std::size_t>(c)];
    return slot < 0 ? nullptr : &cut_cells_[static_cast<std::size_t>(slot)];
  }

  /// Faces of cut cells shared with a neighbouring cell.
  const std::vector<MeshFace>& ghost_faces() const { return ghost_faces_; }

  /// Whether cell c carries support of compartment i.
  bool supports(CellIndex c, int compartment) const;

  /// Volume of compartment i inside cell c.
  double volume(CellIndex c, int compartment) const;

  /// Compartment of p by snippet membership (cut cells) or classification.
  int label(const Vec3& p) const;

  std::size_t snippet_count() const;
  int merged_count() const;

 private:
  BackgroundMesh mesh_;
  std::size_t compartments_ = 0;
  std::vector<CellClass> classes_;
  std::vector<CutCell> cut_cells_;
  std::vector<std::int64_t> cut_slot_;
  std::vector<MeshFace> ghost_faces_;
};

CellClass classify_cell(const BackgroundMesh& mesh, CellIndex cell, const CompartmentModel& model,
                        const CutOptions& options = {});

/// Decomposes one cell into single-compartment snippets and interface facets.
/// Level sets are applied in model order; each cuts the pieces left
/// unassigned by the previous ones.
CutCell cut_cell(const BackgroundMesh& mesh, CellIndex cell, const CompartmentModel& model,
                 const CutOptions& options = {});

CutCellPartition build_partition(const BackgroundMesh& mesh, const CompartmentModel& model,
                                 const CutOptions& options = {},
                                 Execution exec = Execution::kParallel);

/// Per compartment, the sorted list of cells with partial support in it.
/// Throws ConfigError when a compartment has no cells.
std::vector<std::vector<CellIndex>> build_submeshes(const CutCellPartition& partition);

/// Total interface facet area per (inner, outer) pair; outer == kExterior is
/// stored at index compartment_count().
std::vector<std::vector<double>> interface_areas(const CutCellPartition& partition);

/// Total volume per compartment.
std::vector<double> compartment_volumes(const CutCellPartition& partition);

}  // namespace cutfem

#endif
