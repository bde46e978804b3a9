#ifndef CUTFEM_TESTS_SUPPORT_HPP
#define CUTFEM_TESTS_SUPPORT_HPP

// Shared fixtures and independent oracles for the unit and acceptance tests.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "cutfem/assembly.hpp"
#include "cutfem/model.hpp"
#include "cutfem/partition.hpp"
#include "cutfem/quadrature.hpp"
#include "cutfem/sparse.hpp"
#include "cutfem/trial_space.hpp"

namespace cutfem::testing {

/// Four-sphere head with a brain shifted 2 mm off the common centre.
inline CompartmentModel shifted_sphere_model() {
  const Vec3 c(127, 127, 127);
  return CompartmentModel({{"brain", LevelSetField::sphere(Vec3(129, 127, 127), 78), isotropic(0.33)},
                           {"csf", LevelSetField::sphere(c, 80), isotropic(0.33)},
                           {"skull", LevelSetField::sphere(c, 86), isotropic(0.01)},
                           {"scalp", LevelSetField::sphere(c, 92), isotropic(0.43)}});
}

/// Three concentric shells (brain+csf merged) with the same radii.
inline CompartmentModel concentric_sphere_model() {
  const Vec3 c(127, 127, 127);
  return CompartmentModel({{"brain", LevelSetField::sphere(c, 80), isotropic(0.33)},
                           {"skull", LevelSetField::sphere(c, 86), isotropic(0.01)},
                           {"scalp", LevelSetField::sphere(c, 92), isotropic(0.43)}});
}

/// Model, background mesh, cut-cell partition and trial space in one place.
struct Setup {
  CompartmentModel model;
  BackgroundMesh mesh;
  CutCellPartition partition;
  TrialSpace space;

  Setup(CompartmentModel m, BackgroundMesh bm, CutOptions opt = {})
      : model(std::move(m)), mesh(bm), partition(build_partition(mesh, model, opt)),
        space(build_trial_space(mesh, build_submeshes(partition))) {}

  static Setup covering(CompartmentModel m, double h, CutOptions opt = {}) {
    const auto mesh = BackgroundMesh::covering(m.bounding_box(), h);
    return Setup(std::move(m), mesh, opt);
  }
};

/// Monte-Carlo estimate of the volume of compartment i inside box.
inline double monte_carlo_volume(const CompartmentModel& model, int compartment, const Box& box,
                                 long samples, unsigned seed = 12345) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Vec3 ext = box.hi - box.lo;
  long hits = 0;
  for (long n = 0; n < samples; ++n) {
    const Vec3 p = box.lo + Vec3(u(rng) * ext.x(), u(rng) * ext.y(), u(rng) * ext.z());
    if (model.label(p) == compartment) ++hits;
  }
  return ext.prod() * static_cast<double>(hits) / static_cast<double>(samples);
}

/// Integral of x^a y^b z^c over the unit tetrahedron: a! b! c! / (a+b+c+3)!.
inline double unit_tet_monomial(int a, int b, int c) {
  return std::tgamma(a + 1.0) * std::tgamma(b + 1.0) * std::tgamma(c + 1.0) /
         std::tgamma(a + b + c + 4.0);
}

/// Trilinear Laplacian element matrix of a cube of edge h built from 1D
/// mass and stiffness matrices (Kronecker form, no quadrature).
inline Eigen::Matrix<double, 8, 8> kronecker_q1_laplacian(double h) {
  const double mass[2][2] = {{h / 3, h / 6}, {h / 6, h / 3}};
  const double stiff[2][2] = {{1 / h, -1 / h}, {-1 / h, 1 / h}};
  Eigen::Matrix<double, 8, 8> k = Eigen::Matrix<double, 8, 8>::Zero();
  for (int a = 0; a < 8; ++a) {
    for (int b = 0; b < 8; ++b) {
      for (int d = 0; d < 3; ++d) {
        double v = 1.0;
        for (int e = 0; e < 3; ++e) {
          const int ia = (a >> e) & 1;
          const int ib = (b >> e) & 1;
          v *= e == d ? stiff[ia][ib] : mass[ia][ib];
        }
        k(a, b) += v;
      }
    }
  }
  return k;
}

inline Eigen::MatrixXd dense(const CsrMatrix& m) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(m.rows(), m.cols());
  for (std::int32_t r = 0; r < m.rows(); ++r) {
    for (auto k = m.row_ptr()[r]; k < m.row_ptr()[r + 1]; ++k) d(r, m.col_idx()[k]) += m.values()[k];
  }
  return d;
}

/// Zero-mean solution of the singular system K x = b via a bordered dense
/// system [K 1; 1^T 0].
inline Eigen::VectorXd dense_gauged_solve(const CsrMatrix& k, const Eigen::VectorXd& b) {
  const auto n = k.rows();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n + 1, n + 1);
  a.topLeftCorner(n, n) = dense(k);
  a.block(0, n, n, 1).setOnes();
  a.block(n, 0, 1, n).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
  rhs.head(n) = b;
  const Eigen::VectorXd x = a.fullPivLu().solve(rhs);
  return x.head(n);
}

/// Closed-form surface potential of a dipole in a homogeneous sphere (radius
/// r_s, conductivity sigma, centred at the origin), obtained by summing the
/// Legendre series with the generating function sum t^n P_n(c) / n.
inline double homogeneous_sphere_potential(double r_s, double sigma, const Vec3& r0, const Vec3& m,
                                           const Vec3& electrode) {
  const Vec3 x = electrode.normalized() * r_s;
  const Vec3 d = x - r0;
  const double dn = d.norm();
  const Vec3 f = 2.0 * d / (dn * dn * dn) + (x / r_s + d / dn) / (r_s * (r_s - x.dot(r0) / r_s + dn));
  return m.dot(f) / (4.0 * M_PI * sigma);
}

/// Two unit-conductivity compartments split by a tilted plane inside a 3x2x2 bar.
inline Setup tilted_bar(double sigma0 = 1.0, double sigma1 = 1.0) {
  const Vec3 n = Vec3(1.0, 0.3, 0.2).normalized();
  return Setup(CompartmentModel({{"left", LevelSetField::half_space(n, 1.3 * n.x()), isotropic(sigma0)},
                                 {"right", LevelSetField::half_space(Vec3::UnitX(), 100.0), isotropic(sigma1)}}),
               BackgroundMesh(Vec3::Zero(), 1.0, {3, 2, 2}));
}

inline Eigen::VectorXd interpolate(const Setup& s, const std::function<double(const Vec3&)>& u) {
  Eigen::VectorXd x(s.space.size());
  for (Dof d = 0; d < s.space.size(); ++d) x[d] = u(s.mesh.vertex_position(s.space.owner(d).vertex));
  return x;
}

inline Eigen::VectorXd multiply(const CsrMatrix& k, const Eigen::VectorXd& x) {
  Eigen::VectorXd y(k.rows());
  k.multiply({x.data(), static_cast<std::size_t>(x.size())}, {y.data(), static_cast<std::size_t>(y.size())});
  return y;
}

/// Load of a prescribed flux g(x) on the mesh faces x = lo and x = hi of a bar
/// whose end faces lie inside a single compartment each.
inline Eigen::VectorXd end_flux_load(const Setup& s, const std::function<double(const Vec3&)>& flux_lo,
                                     const std::function<double(const Vec3&)>& flux_hi) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(s.space.size());
  const auto& dims = s.mesh.dims();
  const double h = s.mesh.h();
  for (int k = 0; k < dims[2]; ++k) {
    for (int j = 0; j < dims[1]; ++j) {
      for (int end = 0; end < 2; ++end) {
        const CellIndex c = s.mesh.cell_index(end == 0 ? 0 : dims[0] - 1, j, k);
        const Vec3 o = s.mesh.cell_origin(c);
        const Vec3 face = o + Vec3(end == 0 ? 0.0 : h, 0, 0);
        const int comp = s.model.label(face + Vec3(0, h / 2, h / 2));
        const auto dofs = s.space.cell_dofs(comp, c);
        for (const auto& q : face_quadrature(face, h, 0, 4)) {
          const double g = end == 0 ? flux_lo(q.point) : flux_hi(q.point);
          const auto phi = eval_q1(o, h, q.point);
          for (int a = 0; a < 8; ++a) b[dofs[a]] += q.weight * g * phi.value[a];
        }
      }
    }
  }
  return b;
}

inline double gauged_max_error(const Eigen::VectorXd& x, const Eigen::VectorXd& exact) {
  const Eigen::VectorXd a = x.array() - x.mean();
  const Eigen::VectorXd b = exact.array() - exact.mean();
  return (a - b).cwiseAbs().maxCoeff();
}

inline std::vector<double> random_compatible_load(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> f(n);
  double mean = 0.0;
  for (auto& v : f) {
    v = g(rng);
    mean += v;
  }
  mean /= static_cast<double>(n);
  for (auto& v : f) v -= mean;
  return f;
}

}  // namespace cutfem::testing

#endif
