#include <doctest.h>

#include <cmath>
#include <random>

#include "cutfem/error.hpp"
#include "cutfem/quadrature.hpp"
#include "support.hpp"

using namespace cutfem;

namespace {

const Tetrahedron kUnitTet{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};

double integrate(const QuadratureRule& rule, int a, int b, int c) {
  double s = 0.0;
  for (const auto& q : rule) {
    s += q.weight * std::pow(q.point.x(), a) * std::pow(q.point.y(), b) * std::pow(q.point.z(), c);
  }
  return s;
}

}  // namespace

TEST_CASE("order-1 tet rule is the centroid with weight 1/6") {
  const auto rule = tet_quadrature(kUnitTet, 1);
  REQUIRE(rule.size() == 1);
  CHECK(rule[0].weight == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
  CHECK((rule[0].point - Vec3::Constant(0.25)).norm() < 1e-15);
}

TEST_CASE("order-2 tet rule integrates x^2 to 1/60") {
  CHECK(testing::unit_tet_monomial(2, 0, 0) == doctest::Approx(1.0 / 60.0));
  CHECK(integrate(tet_quadrature(kUnitTet, 2), 2, 0, 0) == doctest::Approx(1.0 / 60.0).epsilon(1e-14));
}

TEST_CASE("tet rules are exact for monomials up to their order") {
  for (int order = 1; order <= kMaxSimplexOrder; ++order) {
    const auto rule = tet_quadrature(kUnitTet, order);
    for (int a = 0; a <= order; ++a) {
      for (int b = 0; a + b <= order; ++b) {
        for (int c = 0; a + b + c <= order; ++c) {
          CAPTURE(order);
          CAPTURE(a);
          CAPTURE(b);
          CAPTURE(c);
          CHECK(integrate(rule, a, b, c) == doctest::Approx(testing::unit_tet_monomial(a, b, c)).epsilon(1e-13));
        }
      }
    }
  }
}

TEST_CASE("triangle rules are exact up to their order") {
  const Triangle tri{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  for (int order = 1; order <= kMaxSimplexOrder; ++order) {
    const auto rule = triangle_quadrature(tri, order);
    for (int a = 0; a <= order; ++a) {
      for (int b = 0; a + b <= order; ++b) {
        // a! b! / (a+b+2)!
        const double exact = std::tgamma(a + 1.0) * std::tgamma(b + 1.0) / std::tgamma(a + b + 3.0);
        CHECK(integrate(rule, a, b, 0) == doctest::Approx(exact).epsilon(1e-13));
      }
    }
  }
}

TEST_CASE("weights sum to the simplex measure for arbitrary simplices") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    Tetrahedron t;
    Triangle f;
    for (auto& p : t) p = Vec3(u(rng), u(rng), u(rng));
    for (auto& p : f) p = Vec3(u(rng), u(rng), u(rng));
    for (int order = 1; order <= kMaxSimplexOrder; ++order) {
      double vt = 0.0;
      double vf = 0.0;
      for (const auto& q : tet_quadrature(t, order)) vt += q.weight;
      for (const auto& q : triangle_quadrature(f, order)) vf += q.weight;
      CHECK(vt == doctest::Approx(tet_volume(t)).epsilon(1e-13));
      CHECK(vf == doctest::Approx(triangle_area(f)).epsilon(1e-13));
    }
  }
}

TEST_CASE("unsupported simplex orders are rejected") {
  CHECK_THROWS_AS(tet_quadrature(kUnitTet, 0), DomainError);
  CHECK_THROWS_AS(tet_quadrature(kUnitTet, kMaxSimplexOrder + 1), DomainError);
  CHECK_THROWS_AS(triangle_quadrature({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)}, 9), DomainError);
}

TEST_CASE("box and face tensor rules") {
  const Box box{Vec3(1, 2, 3), Vec3(2, 4, 6)};
  // integral of x^3 y^2 z over the box, separable
  const double exact = (std::pow(2, 4) - 1) / 4 * (std::pow(4, 3) - 8) / 3 * (36 - 9) / 2.0;
  double s = 0.0;
  for (const auto& q : box_quadrature(box, 3)) s += q.weight * std::pow(q.point.x(), 3) * q.point.y() * q.point.y() * q.point.z();
  CHECK(s == doctest::Approx(exact).epsilon(1e-13));

  double area = 0.0;
  double moment = 0.0;
  for (const auto& q : face_quadrature(Vec3(0, 0, 5), 2.0, 2, 2)) {
    CHECK(q.point.z() == 5.0);
    area += q.weight;
    moment += q.weight * q.point.x() * q.point.x();
  }
  CHECK(area == doctest::Approx(4.0));
  CHECK(moment == doctest::Approx(16.0 / 3.0));

  const auto gl = gauss_legendre_unit(5);
  double m8 = 0.0;
  for (auto [x, w] : gl) m8 += w * std::pow(x, 9);
  CHECK(m8 == doctest::Approx(0.1).epsilon(1e-14));
}
