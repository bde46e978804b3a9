#ifndef CUTFEM_QUADRATURE_HPP
#define CUTFEM_QUADRATURE_HPP

#include <array>
#include <vector>

#include "cutfem/level_set.hpp"

namespace cutfem {

struct QuadPoint {
  Vec3 point;
  double weight;
};

using QuadratureRule = std::vector<QuadPoint>;

using Tetrahedron = std::array<Vec3, 4>;
using Triangle = std::array<Vec3, 3>;

double tet_volume(const Tetrahedron& t);
double triangle_area(const Triangle& t);

/// Highest polynomial degree integrated exactly by the simplex rules.
inline constexpr int kMaxSimplexOrder = 5;

/// Symmetric rule exact for polynomials of total degree <= order (1..5) on
/// the tetrahedron; weights sum to its volume. Throws DomainError otherwise.
QuadratureRule tet_quadrature(const Tetrahedron& tet, int order);

/// Same for triangles embedded in 3D; weights sum to the area.
QuadratureRule triangle_quadrature(const Triangle& tri, int order);

/// Gauss-Legendre points and weights on [0,1] with n points (exact to degree 2n-1).
std::vector<std::pair<double, double>> gauss_legendre_unit(int n);

/// Tensor Gauss-Legendre rule on an axis-aligned box, exact per coordinate
/// to the requested degree.
QuadratureRule box_quadrature(const Box& box, int order);

/// Tensor rule on an axis-aligned square face: the fixed axis is `axis`.
QuadratureRule face_quadrature(const Vec3& lower_corner, double edge, int axis, int order);

}  // namespace cutfem

#endif
