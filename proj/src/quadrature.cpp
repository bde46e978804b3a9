#include "cutfem/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "cutfem/error.hpp"

namespace cutfem {

namespace {

struct BarycentricPoint {
  std::array<double, 4> lambda;  // unused trailing entries are zero for triangles
  double weight;                 // normalized to a unit-measure simplex
};

std::vector<BarycentricPoint> tet_reference(int order) {
  std::vector<BarycentricPoint> rule;
  auto add_class_31 = [&](double a, double w) {
    for (int i = 0; i < 4; ++i) {
      std::array<double, 4> l{a, a, a, a};
      l[i] = 1.0 - 3.0 * a;
      rule.push_back({l, w});
    }
  };
  switch (order) {
    case 1:
      rule.push_back({{0.25, 0.25, 0.25, 0.25}, 1.0});
      break;
    case 2:
      add_class_31(0.1381966011250105151795, 0.25);
      break;
    case 3:
    case 4:
    case 5: {
      // 14-point degree-5 rule with positive weights.
      add_class_31(0.0927352503108912264, 0.0734930431163619495);
      add_class_31(0.3108859192633006097, 0.1126879257180158508);
      const double c = 0.0455037041256496494;
      const double w = 0.0425460207770814665;
      const double d = 0.5 - c;
      rule.push_back({{c, c, d, d}, w});
      rule.push_back({{c, d, c, d}, w});
      rule.push_back({{c, d, d, c}, w});
      rule.push_back({{d, c, c, d}, w});
      rule.push_back({{d, c, d, c}, w});
      rule.push_back({{d, d, c, c}, w});
      break;
    }
    default:
      throw DomainError("unsupported tetrahedron quadrature order " + std::to_string(order));
  }
  return rule;
}

std::vector<BarycentricPoint> triangle_reference(int order) {
  std::vector<BarycentricPoint> rule;
  auto add_class_21 = [&](double a, double b, double w) {
    for (int i = 0; i < 3; ++i) {
      std::array<double, 4> l{b, b, b, 0.0};
      l[i] = a;
      rule.push_back({l, w});
    }
  };
  switch (order) {
    case 1:
      rule.push_back({{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0}, 1.0});
      break;
    case 2:
      add_class_21(2.0 / 3.0, 1.0 / 6.0, 1.0 / 3.0);
      break;
    case 3:
    case 4:
    case 5:
      rule.push_back({{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0}, 0.225});
      add_class_21(0.0597158717897698205, 0.4701420641051150898, 0.1323941527885061807);
      add_class_21(0.7974269853530873223, 0.1012865073234563388, 0.1259391805448271526);
      break;
    default:
      throw DomainError("unsupported triangle quadrature order " + std::to_string(order));
  }
  return rule;
}

const std::vector<BarycentricPoint>& cached_tet(int order) {
  static const std::array<std::vector<BarycentricPoint>, kMaxSimplexOrder + 1> rules = [] {
    std::array<std::vector<BarycentricPoint>, kMaxSimplexOrder + 1> r;
    for (int o = 1; o <= kMaxSimplexOrder; ++o) r[o] = tet_reference(o);
    return r;
  }();
  if (order < 1 || order > kMaxSimplexOrder) tet_reference(order);  // throws
  return rules[order];
}

const std::vector<BarycentricPoint>& cached_triangle(int order) {
  static const std::array<std::vector<BarycentricPoint>, kMaxSimplexOrder + 1> rules = [] {
    std::array<std::vector<BarycentricPoint>, kMaxSimplexOrder + 1> r;
    for (int o = 1; o <= kMaxSimplexOrder; ++o) r[o] = triangle_reference(o);
    return r;
  }();
  if (order < 1 || order > kMaxSimplexOrder) triangle_reference(order);  // throws
  return rules[order];
}

}  // namespace

double tet_volume(const Tetrahedron& t) {
  return std::abs((t[1] - t[0]).dot((t[2] - t[0]).cross(t[3] - t[0]))) / 6.0;
}

double triangle_area(const Triangle& t) { return 0.5 * (t[1] - t[0]).cross(t[2] - t[0]).norm(); }

QuadratureRule tet_quadrature(const Tetrahedron& tet, int order) {
  const auto& ref = cached_tet(order);
  const double vol = tet_volume(tet);
  QuadratureRule rule;
  rule.reserve(ref.size());
  for (const auto& q : ref) {
    const Vec3 p = q.lambda[0] * tet[0] + q.lambda[1] * tet[1] + q.lambda[2] * tet[2] +
                   q.lambda[3] * tet[3];
    rule.push_back({p, q.weight * vol});
  }
  return rule;
}

QuadratureRule triangle_quadrature(const Triangle& tri, int order) {
  const auto& ref = cached_triangle(order);
  const double area = triangle_area(tri);
  QuadratureRule rule;
  rule.reserve(ref.size());
  for (const auto& q : ref) {
    const Vec3 p = q.lambda[0] * tri[0] + q.lambda[1] * tri[1] + q.lambda[2] * tri[2];
    rule.push_back({p, q.weight * area});
  }
  return rule;
}

std::vector<std::pair<double, double>> gauss_legendre_unit(int n) {
  if (n < 1) throw DomainError("Gauss-Legendre rule needs at least one point");
  std::vector<std::pair<double, double>> rule(n);
  // Newton iteration on P_n from the Chebyshev initial guess.
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 1.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule[n - 1 - i] = {0.5 * (x + 1.0), 0.5 * w};
  }
  return rule;
}

QuadratureRule box_quadrature(const Box& box, int order) {
  if (order < 0) throw DomainError("negative quadrature order");
  const int n = order / 2 + 1;
  const auto gl = gauss_legendre_unit(n);
  const Vec3 size = box.hi - box.lo;
  const double vol = size.prod();
  QuadratureRule rule;
  rule.reserve(static_cast<std::size_t>(n) * n * n);
  for (const auto& [z, wz] : gl) {
    for (const auto& [y, wy] : gl) {
      for (const auto& [x, wx] : gl) {
        rule.push_back({box.lo + size.cwiseProduct(Vec3(x, y, z)), wx * wy * wz * vol});
      }
    }
  }
  return rule;
}

QuadratureRule face_quadrature(const Vec3& lower_corner, double edge, int axis, int order) {
  const int n = order / 2 + 1;
  const auto gl = gauss_legendre_unit(n);
  const int a = (axis + 1) % 3;
  const int b = (axis + 2) % 3;
  QuadratureRule rule;
  rule.reserve(static_cast<std::size_t>(n) * n);
  for (const auto& [t, wt] : gl) {
    for (const auto& [s, ws] : gl) {
      Vec3 p = lower_corner;
      p[a] += s * edge;
      p[b] += t * edge;
      rule.push_back({p, ws * wt * edge * edge});
    }
  }
  return rule;
}

}  // namespace cutfem
