#ifndef CUTFEM_ELECTRODES_HPP
#define CUTFEM_ELECTRODES_HPP

#include <filesystem>
#include <span>
#include <vector>

#include "cutfem/model.hpp"
#include "cutfem/partition.hpp"
#include "cutfem/sparse.hpp"
#include "cutfem/trial_space.hpp"

namespace cutfem {

struct Electrode {
  Vec3 position;        // as given, mm
  Vec3 snapped;         // evaluation point inside the outermost compartment
  double snap_distance = 0.0;
  std::vector<Dof> dofs;        // outermost-compartment DOFs with non-zero weight
  std::vector<double> weights;  // trilinear weights, summing to 1
};

/// Electrode positions and the restriction DOFs -> electrode potentials.
class ElectrodeSet {
 public:
  ElectrodeSet() = default;
  ElectrodeSet(std::vector<Electrode> electrodes, int compartment, Dof dofs)
      : electrodes_(std::move(electrodes)), compartment_(compartment), dofs_(dofs) {}

  std::size_t size() const { return electrodes_.size(); }
  const Electrode& operator[](std::size_t e) const { return electrodes_[e]; }
  const std::vector<Electrode>& electrodes() const { return electrodes_; }
  int compartment() const { return compartment_; }

  /// Potential of electrode e for the coefficient vector u.
  double evaluate(std::size_t e, std::span<const double> u) const;
  std::vector<double> evaluate(std::span<const double> u) const;

  /// Dense restriction row r_e.
  std::vector<double> row(std::size_t e) const;
  CsrMatrix restriction() const;

 private:
  std::vector<Electrode> electrodes_;
  int compartment_ = 0;
  Dof dofs_ = 0;
};

/// Attaches electrodes to the outermost compartment. Positions outside it are
/// moved to its nearest point; moves longer than max_snap (default 2h) are
/// errors.
ElectrodeSet electrode_restriction(const TrialSpace& space, const CutCellPartition& partition,
                                   const CompartmentModel& model, std::span<const Vec3> positions,
                                   double max_snap = -1.0);

/// Points evenly spread over a sphere (Fibonacci lattice).
std::vector<Vec3> fibonacci_sphere(std::size_t count, const Vec3& center, double radius);

/// ASCII positions, one `x y z` per line; `#` starts a comment.
std::vector<Vec3> read_positions(const std::filesystem::path& path);
void write_positions(const std::filesystem::path& path, std::span<const Vec3> positions);

}  // namespace cutfem

#endif
