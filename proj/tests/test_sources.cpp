#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>

#include <Eigen/Dense>

#include "cutfem/error.hpp"
#include "cutfem/sources.hpp"
#include "support.hpp"

using namespace cutfem;
using testing::Setup;

namespace {

const Setup& sphere8() {
  static const Setup s = Setup::covering(testing::shifted_sphere_model(), 8.0);
  return s;
}

/// Single homogeneous sphere, r = 40, on a 4 mm grid.
const Setup& ball() {
  static const Setup s = Setup::covering(
      CompartmentModel({{"ball", LevelSetField::sphere(Vec3(0.3, -0.2, 0.1), 40.0), isotropic(0.33)}}), 4.0);
  return s;
}

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  return Vec3(g(rng), g(rng), g(rng)).normalized();
}

Dipole random_brain_dipole(const Setup& s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Vec3 c(129, 127, 127);
  for (;;) {
    const Vec3 p = c + 77.0 * Vec3(u(rng), u(rng), u(rng));
    if (s.model.label(p) == 0 && s.partition.label(p) == 0) return {p, 10.0 * random_unit(rng)};
  }
}

struct Moments {
  double total = 0.0;
  double l1 = 0.0;
  Vec3 first = Vec3::Zero();
};

Moments moments(const std::vector<Monopole>& q, const Vec3& x0) {
  Moments m;
  for (const auto& p : q) {
    m.total += p.charge;
    m.l1 += std::abs(p.charge);
    m.first += p.charge * (p.position - x0);
  }
  return m;
}

}  // namespace

TEST_CASE("Venant monopoles reproduce the zeroth and first moments") {
  const auto& s = sphere8();
  std::mt19937_64 rng(17);
  for (int k = 0; k < 50; ++k) {
    const auto d = random_brain_dipole(s, rng);
    const auto q = venant_monopoles(d, s.partition, s.model, 0);
    REQUIRE(q.size() >= 4);
    const auto m = moments(q, d.position);
    CHECK(std::abs(m.total) <= 1e-12 * m.l1);
    CHECK((m.first - d.moment).norm() <= 1e-8 * d.moment.norm());
    for (const auto& p : q) {
      CHECK(s.model[0].level_set.value(p.position) < 0.0);
      CHECK(s.partition.label(p.position) == 0);
    }
  }
}

TEST_CASE("Venant charges are linear in the moment") {
  const auto& s = sphere8();
  std::mt19937_64 rng(3);
  for (int k = 0; k < 10; ++k) {
    auto d1 = random_brain_dipole(s, rng);
    auto d2 = d1;
    d2.moment = 7.0 * random_unit(rng);
    auto d12 = d1;
    d12.moment = d1.moment + d2.moment;
    const auto q1 = venant_monopoles(d1, s.partition, s.model, 0);
    const auto q2 = venant_monopoles(d2, s.partition, s.model, 0);
    const auto q12 = venant_monopoles(d12, s.partition, s.model, 0);
    REQUIRE(q1.size() == q12.size());
    double scale = 0.0;
    for (const auto& p : q12) scale = std::max(scale, std::abs(p.charge));
    for (std::size_t i = 0; i < q12.size(); ++i) {
      CHECK(std::abs(q12[i].charge - q1[i].charge - q2[i].charge) <= 1e-10 * scale);
    }
  }
}

TEST_CASE("Venant charges agree with a null-space least-squares oracle") {
  const auto& s = sphere8();
  std::mt19937_64 rng(5);
  VenantConfig cfg;
  int checked = 0;
  int cut = 0;
  while (checked < 12) {
    // The dense oracle is cubic in the site count; cell-only neighbourhoods
    // keep cut-cell cases small enough.
    cfg.neighborhood = checked % 2 == 0 ? VenantNeighborhood::kCellAndFaceNeighbors : VenantNeighborhood::kCell;
    const auto d = random_brain_dipole(s, rng);
    const auto q = venant_monopoles(d, s.partition, s.model, 0, cfg);
    const auto n = static_cast<Eigen::Index>(q.size());
    if (n > 400) continue;
    ++checked;
    if (n != 56 && n != 8) ++cut;
    const double h = s.mesh.h();
    // Rows: 1, x, y, z, then the six second-order monomials. Extended
    // precision keeps the oracle's own rounding well below the tolerance.
    using MatL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
    using VecL = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
    MatL mm(10, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const Eigen::Matrix<long double, 3, 1> x =
          ((q[static_cast<std::size_t>(j)].position - d.position) / h).cast<long double>();
      mm.col(j) << 1, x.x(), x.y(), x.z(), x.x() * x.x(), x.x() * x.y(), x.x() * x.z(), x.y() * x.y(),
          x.y() * x.z(), x.z() * x.z();
    }
    const MatL c = mm.topRows(4);
    const MatL a = mm.bottomRows(6);
    VecL rhs(4);
    rhs << 0, (d.moment / h).cast<long double>();
    // q = q_p + Z y with C Z = 0, then the regularised problem in y.
    const VecL qp = c.completeOrthogonalDecomposition().solve(rhs);
    Eigen::FullPivLU<MatL> lu(c);
    const MatL z = lu.kernel();
    const MatL hz = a.transpose() * a + static_cast<long double>(cfg.lambda) * MatL::Identity(n, n);
    const VecL y = (z.transpose() * hz * z).ldlt().solve(-z.transpose() * hz * qp);
    const Eigen::VectorXd ref = (qp + z * y).cast<double>();
    double err = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) err = std::max(err, std::abs(ref[j] - q[static_cast<std::size_t>(j)].charge));
    CHECK(err <= 1e-8 * ref.cwiseAbs().maxCoeff());
  }
  CHECK(cut > 0);
}

TEST_CASE("Venant charges are antisymmetric for a point-symmetric site layout") {
  const auto& s = ball();
  const CellIndex c = s.mesh.locate(Vec3(0.3, -0.2, 0.1));
  REQUIRE(s.partition.cell_class(c).kind == CellKind::kInterior);
  const Vec3 centre = s.mesh.cell_origin(c) + Vec3::Constant(0.5 * s.mesh.h());
  const Dipole d{centre, Vec3(1.0, -2.0, 0.5)};
  const auto q = venant_monopoles(d, s.partition, s.model, 0);
  REQUIRE(q.size() == 7 * 8);
  double scale = 0.0;
  for (const auto& p : q) scale = std::max(scale, std::abs(p.charge));
  for (const auto& p : q) {
    const Vec3 mirror = 2.0 * centre - p.position;
    const auto it = std::find_if(q.begin(), q.end(), [&](const Monopole& o) { return (o.position - mirror).norm() < 1e-9; });
    REQUIRE(it != q.end());
    CHECK(std::abs(p.charge + it->charge) <= 1e-8 * scale);
  }
}

TEST_CASE("Venant charges rotate with the moment on a cubic site layout") {
  const auto& s = ball();
  const CellIndex c = s.mesh.locate(Vec3(0.3, -0.2, 0.1));
  const Vec3 centre = s.mesh.cell_origin(c) + Vec3::Constant(0.5 * s.mesh.h());
  const Vec3 m(0.4, 1.3, -0.7);
  const auto q = venant_monopoles({centre, m}, s.partition, s.model, 0);
  double scale = 0.0;
  for (const auto& p : q) scale = std::max(scale, std::abs(p.charge));
  // Quarter turns about each axis map the site set onto itself.
  for (int axis = 0; axis < 3; ++axis) {
    const Mat3 r = Eigen::AngleAxisd(M_PI / 2, Vec3::Unit(axis)).toRotationMatrix();
    const auto qr = venant_monopoles({centre, r * m}, s.partition, s.model, 0);
    for (const auto& p : q) {
      const Vec3 image = centre + r * (p.position - centre);
      const auto it =
          std::find_if(qr.begin(), qr.end(), [&](const Monopole& o) { return (o.position - image).norm() < 1e-9; });
      REQUIRE(it != qr.end());
      CHECK(std::abs(it->charge - p.charge) <= 1e-8 * scale);
    }
  }
}

TEST_CASE("Venant loads sum to zero") {
  const auto& s = sphere8();
  std::mt19937_64 rng(8);
  for (int k = 0; k < 5; ++k) {
    const auto d = random_brain_dipole(s, rng);
    const auto load = assemble_load(s.space, s.partition, venant_monopoles(d, s.partition, s.model, 0), 0);
    double sum = 0.0;
    double l1 = 0.0;
    for (double v : load) {
      sum += v;
      l1 += std::abs(v);
    }
    CHECK(l1 > 0.0);
    CHECK(std::abs(sum) <= 1e-12 * l1);
  }
}

TEST_CASE("Venant errors") {
  const auto& s = sphere8();
  CHECK_THROWS_AS(venant_monopoles({Vec3(127, 127, 127 + 89), Vec3::UnitX()}, s.partition, s.model, 0),
                  DomainError);
  VenantConfig bad;
  bad.order = 0;
  CHECK_THROWS_AS(venant_monopoles({Vec3(129, 127, 127), Vec3::UnitX()}, s.partition, s.model, 0, bad),
                  ConfigError);
  bad = {};
  bad.lambda = -1.0;
  CHECK_THROWS_AS(venant_monopoles({Vec3(129, 127, 127), Vec3::UnitX()}, s.partition, s.model, 0, bad),
                  ConfigError);
  CHECK(parse_venant_neighborhood("cell") == VenantNeighborhood::kCell);
  CHECK(parse_venant_neighborhood("cell+faces") == VenantNeighborhood::kCellAndFaceNeighbors);
  CHECK_THROWS_AS(parse_venant_neighborhood("ball"), ConfigError);
}

TEST_CASE("Venant with the containing cell only") {
  const auto& s = sphere8();
  VenantConfig cfg;
  cfg.neighborhood = VenantNeighborhood::kCell;
  const Dipole d{Vec3(130.1, 126.3, 128.9), Vec3(0, 0, 5)};
  const auto q = venant_monopoles(d, s.partition, s.model, 0, cfg);
  CHECK(q.size() == 8);
  const auto m = moments(q, d.position);
  CHECK((m.first - d.moment).norm() <= 1e-8 * d.moment.norm());
}

TEST_CASE("source grid on a homogeneous sphere") {
  const auto& s = ball();
  const Vec3 centre(0.3, -0.2, 0.1);
  const auto grid = source_grid(s.partition, s.model, 0, 20.0, centre);
  // |k|^2 < 4 on the integer lattice: 1 + 6 + 12 + 8.
  CHECK(grid.size() == 27);

  const Vec3 anchor(1.7, -3.1, 2.4);
  const double spacing = 6.0;
  const auto g2 = source_grid(s.partition, s.model, 0, spacing, anchor);
  std::size_t expected = 0;
  for (int i = -20; i <= 20; ++i) {
    for (int j = -20; j <= 20; ++j) {
      for (int k = -20; k <= 20; ++k) {
        const Vec3 p = anchor + spacing * Vec3(i, j, k);
        if ((p - centre).norm() < 40.0 - 0.02 * s.mesh.h()) ++expected;
      }
    }
  }
  // Points within the facet sagitta of the surface may go either way.
  std::size_t band = 0;
  for (int i = -20; i <= 20; ++i) {
    for (int j = -20; j <= 20; ++j) {
      for (int k = -20; k <= 20; ++k) {
        const double r = (anchor + spacing * Vec3(i, j, k) - centre).norm();
        if (r >= 40.0 - 0.02 * s.mesh.h() && r < 40.0) ++band;
      }
    }
  }
  CHECK(g2.size() >= expected);
  CHECK(g2.size() <= expected + band);
  for (const auto& p : g2) {
    CHECK(s.model[0].level_set.value(p.position) < 0.0);
    CHECK(p.depth == doctest::Approx(40.0 - (p.position - centre).norm()).epsilon(1e-12));
    CHECK(p.near_boundary == (p.depth < s.mesh.h()));
  }
}

TEST_CASE("source grid errors") {
  const auto& s = ball();
  CHECK_THROWS_AS(source_grid(s.partition, s.model, 0, 500.0, Vec3(1000, 250, 250)), DomainError);
  CHECK_THROWS_AS(source_grid(s.partition, s.model, 0, 0.0), ConfigError);
  CHECK_THROWS_AS(source_grid(s.partition, s.model, 3, 2.0), ConfigError);
}

TEST_CASE("shifted-sphere source grid stays in the brain") {
  const auto& s = sphere8();
  const auto grid = source_grid(s.partition, s.model, 0, 10.0);
  CHECK(grid.size() > 1000);
  for (const auto& p : grid) CHECK(s.model.label(p.position) == 0);
}

TEST_CASE("dipole files") {
  const auto path = std::filesystem::temp_directory_path() / "cutfem_dipoles.txt";
  const std::vector<Dipole> d{{Vec3(1, 2, 3), Vec3(0.1, 0.2, 0.3)}, {Vec3(-1, 0.5, 1e-3), Vec3(0, 0, 1)}};
  write_dipoles(path, d);
  const auto back = read_dipoles(path);
  REQUIRE(back.size() == 2);
  CHECK(back[1].position == d[1].position);
  CHECK(back[0].moment == d[0].moment);
  {
    std::ofstream out(path);
    out << "# positions only\n1 2 3\n4 5 6 # trailing\n";
  }
  const auto pos = read_dipoles(path);
  REQUIRE(pos.size() == 2);
  CHECK(pos[1].moment == Vec3::Zero());
  {
    std::ofstream out(path);
    out << "1 2 3 4\n";
  }
  CHECK_THROWS_AS(read_dipoles(path), IoError);
  {
    std::ofstream out(path);
    out << "1 2 x\n";
  }
  CHECK_THROWS_AS(read_dipoles(path), IoError);
  std::filesystem::remove(path);
}
