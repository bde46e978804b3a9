#include "cutfem/analytic.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "cutfem/error.hpp"

namespace cutfem {

namespace {

// Radial factor (2n+1) / B_n: the outer-surface value of the shell solution
// normalised so the innermost shell carries the primary field r^-(n+1) with
// unit coefficient. Radii are scaled by the outer radius.
std::vector<double> radial_factors(const SphereModel& m) {
  const auto shells = m.radii.size();
  std::vector<double> out(static_cast<std::size_t>(m.terms) + 1, 0.0);
  for (int n = 1; n <= m.terms; ++n) {
    const double dn = n;
    // Zero flux at the outer surface.
    double a = dn + 1.0;
    double b = dn;
    for (std::size_t j = 1; j < shells; ++j) {
      const double rho = m.radii[j] / m.radii[0];
      const double rn = std::pow(rho, dn);
      const double rm = std::pow(rho, -dn - 1.0);
      const double v = a * rn + b * rm;
      const double flux = m.conductivities[j - 1] * (dn * a * rn - (dn + 1.0) * b * rm);
      const double g = flux / m.conductivities[j];
      const double bb = (dn * v - g) / (2.0 * dn + 1.0);
      const double aa = v - bb;
      a = aa / rn;
      b = bb / rm;
    }
    out[static_cast<std::size_t>(n)] = (2.0 * dn + 1.0) / b;
  }
  return out;
}

}  // namespace

void SphereModel::validate() const {
  if (radii.empty() || radii.size() != conductivities.size()) {
    throw ConfigError("sphere model needs one conductivity per shell");
  }
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (!(radii[i] > 0.0)) throw ConfigError("sphere radii must be positive");
    if (i > 0 && !(radii[i] < radii[i - 1])) throw ConfigError("sphere radii must decrease from the outside in");
    if (!(conductivities[i] > 0.0)) throw ConfigError("shell conductivities must be positive");
  }
  if (terms < 1) throw ConfigError("series truncation must be at least 1");
}

double SphereModel::eccentricity(const Vec3& p) const { return (p - center).norm() / inner_radius(); }

SphereModel sphere_model_from(const CompartmentModel& model, int terms) {
  SphereModel out;
  out.terms = terms;
  for (std::size_t i = model.size(); i-- > 0;) {
    const auto& c = model[i];
    const auto* s = c.level_set.as_sphere();
    if (s == nullptr) throw ConfigError(fmt::format("compartment '{}' is not a sphere", c.name));
    const Mat3& sig = c.conductivity;
    if ((sig - sig(0, 0) * Mat3::Identity()).norm() > 1e-12 * sig.norm()) {
      throw ConfigError(fmt::format("compartment '{}' is anisotropic", c.name));
    }
    if (out.radii.empty()) {
      out.center = s->center;
    } else if ((s->center - out.center).norm() > 1e-9 * s->radius) {
      // An inner sphere off centre is only allowed when it cannot be seen:
      // same conductivity as the shell around it.
      if (sig(0, 0) != out.conductivities.back()) {
        throw ConfigError(fmt::format("compartment '{}' is not concentric", c.name));
      }
      continue;
    }
    if (!out.conductivities.empty() && out.conductivities.back() == sig(0, 0)) {
      out.radii.back() = s->radius;
      continue;
    }
    out.radii.push_back(s->radius);
    out.conductivities.push_back(sig(0, 0));
  }
  out.validate();
  return out;
}

std::vector<double> sphere_forward(const SphereModel& model, const Dipole& dipole,
                                   std::span<const Vec3> electrodes) {
  model.validate();
  const double r_out = model.outer_radius();
  const Vec3 y = (dipole.position - model.center) / r_out;
  const double y_norm = y.norm();
  if (!(y_norm * r_out < model.inner_radius())) {
    throw DomainError(fmt::format("dipole at distance {:.6g} mm from the centre is not inside the innermost "
                                  "shell (radius {:.6g} mm)",
                                  y_norm * r_out, model.inner_radius()));
  }
  const auto factor = radial_factors(model);
  const double scale = 1.0 / (4.0 * std::numbers::pi * model.conductivities.back() * r_out * r_out);
  const Vec3 y_hat = y_norm > 0.0 ? Vec3(y / y_norm) : Vec3::Zero();

  std::vector<double> out(electrodes.size());
  double worst_snap = 0.0;
  double worst_tail = 0.0;
  for (std::size_t e = 0; e < electrodes.size(); ++e) {
    const Vec3 d = electrodes[e] - model.center;
    const double dn = d.norm();
    if (dn == 0.0) throw DomainError("electrode at the sphere centre");
    worst_snap = std::max(worst_snap, std::abs(dn - r_out));
    const Vec3 x = d / dn;
    const double c = y_norm > 0.0 ? x.dot(y_hat) : 0.0;
    const double mx = dipole.moment.dot(x);
    const double my = dipole.moment.dot(y_hat);
    // Gradient of |y|^n P_n(x.y/|y|) along the moment:
    // n |y|^(n-1) P_n(c) m.y_hat + |y|^(n-1) P_n'(c) (m.x - c m.y_hat).
    double p_prev = 1.0;  // P_0
    double p = c;         // P_1
    double dp_prev = 0.0;
    double dp = 1.0;
    double y_pow = 1.0;   // |y|^(n-1)
    double sum = 0.0;
    // Bound on |term n| from |P_n| <= 1 and |P_n'| <= n(n+1)/2.
    double last = 0.0;
    double before = 0.0;
    const double m_norm = dipole.moment.norm();
    for (int n = 1; n <= model.terms; ++n) {
      const double dn1 = n;
      const double f = factor[static_cast<std::size_t>(n)];
      sum += f * y_pow * (dn1 * p * my + dp * (mx - c * my));
      before = last;
      last = std::abs(f) * y_pow * m_norm * (dn1 + dn1 * (dn1 + 1.0));
      // Legendre recurrences for P_{n+1} and its derivative.
      const double p_next = ((2.0 * dn1 + 1.0) * c * p - dn1 * p_prev) / (dn1 + 1.0);
      const double dp_next = dp_prev + (2.0 * dn1 + 1.0) * p;
      p_prev = p;
      p = p_next;
      dp_prev = dp;
      dp = dp_next;
      y_pow *= y_norm;
    }
    // Geometric tail of the bound.
    double tail = 0.0;
    if (last != 0.0) {
      const double q = before != 0.0 ? std::abs(last / before) : 0.0;
      tail = q < 1.0 ? std::abs(last) * q / (1.0 - q) : std::numeric_limits<double>::infinity();
    }
    out[e] = scale * sum;
    worst_tail = std::max(worst_tail, tail * scale);
  }
  double norm = 0.0;
  for (double v : out) norm = std::max(norm, std::abs(v));
  if (worst_tail > 1e-10 * norm) {
    throw DomainError(fmt::format("Legendre series not converged with {} terms (tail {:.3g} of the potentials); "
                                  "increase the number of terms",
                                  model.terms, norm > 0.0 ? worst_tail / norm : worst_tail));
  }
  if (worst_snap > 1e-9 * r_out) spdlog::debug("analytic: electrodes projected radially by up to {:.3g} mm", worst_snap);
  double mean = 0.0;
  for (double v : out) mean += v;
  mean /= static_cast<double>(std::max<std::size_t>(1, out.size()));
  for (double& v : out) v -= mean;
  return out;
}

}  // namespace cutfem
