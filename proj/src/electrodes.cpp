#include "cutfem/electrodes.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "cutfem/error.hpp"

namespace cutfem {

namespace {

// Newton projection onto the zero set of a level set.
Vec3 project_to_surface(const LevelSetField& ls, Vec3 q, double tol) {
  for (int it = 0; it < 100; ++it) {
    const double f = ls.value(q);
    if (std::abs(f) <= tol) break;
    const Vec3 g = ls.gradient(q);
    const double gg = g.squaredNorm();
    if (gg == 0.0) throw DomainError("level-set gradient vanishes while snapping an electrode");
    q -= (f / gg) * g;
  }
  return q;
}

}  // namespace

double ElectrodeSet::evaluate(std::size_t e, std::span<const double> u) const {
  const auto& el = electrodes_[e];
  double v = 0.0;
  for (std::size_t k = 0; k < el.dofs.size(); ++k) v += el.weights[k] * u[static_cast<std::size_t>(el.dofs[k])];
  return v;
}

std::vector<double> ElectrodeSet::evaluate(std::span<const double> u) const {
  std::vector<double> out(electrodes_.size());
  for (std::size_t e = 0; e < out.size(); ++e) out[e] = evaluate(e, u);
  return out;
}

std::vector<double> ElectrodeSet::row(std::size_t e) const {
  std::vector<double> r(static_cast<std::size_t>(dofs_), 0.0);
  const auto& el = electrodes_[e];
  for (std::size_t k = 0; k < el.dofs.size(); ++k) r[static_cast<std::size_t>(el.dofs[k])] += el.weights[k];
  return r;
}

CsrMatrix ElectrodeSet::restriction() const {
  std::vector<std::int64_t> ptr{0};
  std::vector<std::int32_t> idx;
  std::vector<double> val;
  for (const auto& el : electrodes_) {
    std::vector<std::pair<Dof, double>> entries;
    for (std::size_t k = 0; k < el.dofs.size(); ++k) entries.emplace_back(el.dofs[k], el.weights[k]);
    std::sort(entries.begin(), entries.end());
    for (const auto& [d, w] : entries) {
      idx.push_back(d);
      val.push_back(w);
    }
    ptr.push_back(static_cast<std::int64_t>(idx.size()));
  }
  return CsrMatrix(static_cast<std::int32_t>(electrodes_.size()), dofs_, std::move(ptr), std::move(idx),
                   std::move(val));
}

ElectrodeSet electrode_restriction(const TrialSpace& space, const CutCellPartition& partition,
                                   const CompartmentModel& model, std::span<const Vec3> positions,
                                   double max_snap) {
  const auto& mesh = partition.mesh();
  const double h = mesh.h();
  if (max_snap < 0.0) max_snap = 2.0 * h;
  const int outer = model.outermost();
  const auto& ls = model[static_cast<std::size_t>(outer)].level_set;

  std::vector<Electrode> out;
  out.reserve(positions.size());
  double worst = 0.0;
  for (std::size_t e = 0; e < positions.size(); ++e) {
    const Vec3& p = positions[e];
    const auto where = [&] { return fmt::format("electrode {} at ({:.6g}, {:.6g}, {:.6g})", e, p.x(), p.y(), p.z()); };
    const int label = model.label(p);
    if (label != kExterior && label != outer) {
      throw DomainError(fmt::format("{} lies inside compartment '{}', not on the outermost one", where(),
                                    model[static_cast<std::size_t>(label)].name));
    }
    Vec3 q = p;
    if (partition.label(q) != outer) {
      try {
        if (label == kExterior) q = project_to_surface(ls, q, 1e-12 * h);
        // Step inward until the discretised compartment is reached.
        const Vec3 inward = -ls.gradient(q).normalized();
        double step = 1e-9 * h;
        while (partition.label(q + step * inward) != outer && step < max_snap) step *= 2.0;
        q += step * inward;
      } catch (const DomainError&) {
        throw DomainError(fmt::format("{} cannot be snapped to the outermost compartment", where()));
      }
    }
    const double dist = (q - p).norm();
    if (dist > max_snap || partition.label(q) != outer) {
      throw DomainError(fmt::format("{} is {:.3g} mm from the outermost compartment (limit {:.3g} mm)",
                                    where(), dist, max_snap));
    }
    worst = std::max(worst, dist);

    Electrode el;
    el.position = p;
    el.snapped = q;
    el.snap_distance = dist;
    const CellIndex c = mesh.locate(q);
    const auto dofs = space.cell_dofs(outer, c);
    const auto phi = eval_q1(mesh.cell_origin(c), h, q);
    for (int a = 0; a < 8; ++a) {
      if (phi.value[a] == 0.0) continue;
      if (dofs[a] < 0) throw DomainError(fmt::format("{} has no outermost-compartment support", where()));
      el.dofs.push_back(dofs[a]);
      el.weights.push_back(phi.value[a]);
    }
    out.push_back(std::move(el));
  }
  spdlog::info("electrodes: {} attached, largest snap {:.3g} mm", out.size(), worst);
  return ElectrodeSet(std::move(out), outer, space.size());
}

std::vector<Vec3> fibonacci_sphere(std::size_t count, const Vec3& center, double radius) {
  const double golden = M_PI * (3.0 - std::sqrt(5.0));
  std::vector<Vec3> pts;
  pts.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double z = 1.0 - (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(count);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * static_cast<double>(i);
    pts.push_back(center + radius * Vec3(r * std::cos(phi), r * std::sin(phi), z));
  }
  return pts;
}

std::vector<Vec3> read_positions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  std::vector<Vec3> pts;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    double x = 0;
    double y = 0;
    double z = 0;
    if (!(ss >> x)) continue;
    if (!(ss >> y >> z)) throw IoError(fmt::format("{}:{}: expected `x y z`", path.string(), lineno));
    pts.emplace_back(x, y, z);
  }
  return pts;
}

void write_positions(const std::filesystem::path& path, std::span<const Vec3> positions) {
  std::ofstream out(path);
  if (!out) throw IoError(fmt::format("cannot open {} for writing", path.string()));
  for (const auto& p : positions) out << fmt::format("{:.17g} {:.17g} {:.17g}\n", p.x(), p.y(), p.z());
}

}  // namespace cutfem
