#ifndef CUTFEM_ANALYTIC_HPP
#define CUTFEM_ANALYTIC_HPP

#include <span>
#include <vector>

#include "cutfem/level_set.hpp"
#include "cutfem/model.hpp"
#include "cutfem/sources.hpp"

namespace cutfem {

/// Concentric isotropic shells, outermost first.
struct SphereModel {
  std::vector<double> radii;           // mm, strictly decreasing
  std::vector<double> conductivities;  // S/m per shell
  Vec3 center = Vec3::Zero();
  int terms = 200;                     // Legendre series truncation

  void validate() const;
  double inner_radius() const { return radii.back(); }
  double outer_radius() const { return radii.front(); }
  /// |p - center| / innermost radius.
  double eccentricity(const Vec3& p) const;
};

/// Sphere model matching a compartment model made of concentric spheres.
/// Neighbouring shells with equal conductivity are merged. Throws ConfigError
/// when a level set is not a sphere or the centres differ.
SphereModel sphere_model_from(const CompartmentModel& model, int terms = 200);

/// Surface potentials of a dipole in the innermost shell, zero mean over the
/// electrodes. Electrodes are projected radially onto the outer surface.
/// Throws DomainError for a dipole on or outside the innermost boundary and
/// when the truncated tail exceeds 1e-10 of the series.
std::vector<double> sphere_forward(const SphereModel& model, const Dipole& dipole,
                                   std::span<const Vec3> electrodes);

}  // namespace cutfem

#endif
