#include "cutfem/sources.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include <Eigen/Dense>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "cutfem/error.hpp"
#include "cutfem/quadrature.hpp"

namespace cutfem {

namespace {

// Exponent triples with |alpha| <= order, ordered by total degree.
std::vector<std::array<int, 3>> exponents(int order) {
  std::vector<std::array<int, 3>> out;
  for (int deg = 0; deg <= order; ++deg) {
    for (int a = deg; a >= 0; --a) {
      for (int b = deg - a; b >= 0; --b) out.push_back({a, b, deg - a - b});
    }
  }
  return out;
}

void add_box_sites(const Box& box, int n, std::vector<Vec3>& sites) {
  const auto gl = gauss_legendre_unit(n);
  const Vec3 ext = box.hi - box.lo;
  for (const auto& [x, wx] : gl) {
    for (const auto& [y, wy] : gl) {
      for (const auto& [z, wz] : gl) sites.push_back(box.lo + Vec3(x * ext.x(), y * ext.y(), z * ext.z()));
    }
  }
}

// Sites are dropped when the exact level sets put them outside the
// compartment (planar snippet faces deviate from curved interfaces).
std::vector<Vec3> venant_sites(const Vec3& x0, const CutCellPartition& partition, const CompartmentModel& model,
                               int compartment, const VenantConfig& cfg) {
  const auto& mesh = partition.mesh();
  const CellIndex c0 = mesh.locate(x0);
  std::vector<CellIndex> cells{c0};
  if (cfg.neighborhood == VenantNeighborhood::kCellAndFaceNeighbors) {
    for (int axis = 0; axis < 3; ++axis) {
      for (int side : {-1, 1}) {
        const CellIndex n = mesh.neighbor(c0, axis, side);
        if (n >= 0) cells.push_back(n);
      }
    }
  }
  const int n = cfg.quadrature_order;
  const int tet_degree = std::min(2 * n - 1, kMaxSimplexOrder);
  std::vector<Vec3> sites;
  for (CellIndex c : cells) {
    const auto& cls = partition.cell_class(c);
    if (cls.kind == CellKind::kInterior && cls.compartment == compartment) {
      const Vec3 o = mesh.cell_origin(c);
      add_box_sites({o, o + Vec3::Constant(mesh.h())}, n, sites);
    } else if (cls.kind == CellKind::kCut) {
      const auto* cc = partition.cut(c);
      for (const auto& b : cc->boxes) {
        if (b.compartment == compartment) add_box_sites(b.box, n, sites);
      }
      for (const auto& s : cc->snippets) {
        if (s.compartment != compartment) continue;
        for (const auto& q : tet_quadrature(s.tet, tet_degree)) sites.push_back(q.point);
      }
    }
  }
  std::erase_if(sites, [&](const Vec3& p) { return model.label(p) != compartment; });
  return sites;
}

}  // namespace

std::string_view to_string(VenantNeighborhood n) {
  return n == VenantNeighborhood::kCell ? "cell" : "cell+faces";
}

VenantNeighborhood parse_venant_neighborhood(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "cell") return VenantNeighborhood::kCell;
  if (lower == "cell+faces" || lower == "faces") return VenantNeighborhood::kCellAndFaceNeighbors;
  throw ConfigError(fmt::format("unknown Venant neighbourhood '{}' (expected cell or cell+faces)", name));
}

std::vector<Monopole> venant_monopoles(const Dipole& dipole, const CutCellPartition& partition,
                                       const CompartmentModel& model, int compartment, const VenantConfig& cfg) {
  if (cfg.order < 1) throw ConfigError("Venant moment order must be at least 1");
  if (cfg.lambda < 0.0) throw ConfigError("Venant regularisation must be non-negative");
  if (cfg.quadrature_order < 1) throw ConfigError("Venant quadrature order must be at least 1");
  const Vec3& x0 = dipole.position;
  if (partition.label(x0) != compartment || model.label(x0) != compartment) {
    throw DomainError(fmt::format("dipole at ({:.6g}, {:.6g}, {:.6g}) is not inside source compartment {}",
                                  x0.x(), x0.y(), x0.z(), compartment));
  }
  const auto sites = venant_sites(x0, partition, model, compartment, cfg);
  const auto n = static_cast<Eigen::Index>(sites.size());
  if (n < 4) {
    throw DomainError(fmt::format("only {} Venant sites near ({:.6g}, {:.6g}, {:.6g}); use the cell+faces "
                                  "neighbourhood",
                                  n, x0.x(), x0.y(), x0.z()));
  }

  const double h = partition.mesh().h();
  const auto alphas = exponents(cfg.order);
  const auto m = static_cast<Eigen::Index>(alphas.size());
  Eigen::MatrixXd moments(m, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Vec3 d = (sites[static_cast<std::size_t>(j)] - x0) / h;
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto& a = alphas[static_cast<std::size_t>(i)];
      moments(i, j) = std::pow(d.x(), a[0]) * std::pow(d.y(), a[1]) * std::pow(d.z(), a[2]);
    }
  }
  // Rows 0..3 (total charge and first moments) are constraints, the rest is
  // penalised together with the charges.
  const Eigen::MatrixXd c = moments.topRows(4);
  const Eigen::MatrixXd a = moments.bottomRows(m - 4);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(c.transpose());
  qr.setThreshold(1e-10);
  if (qr.rank() < 4) {
    throw DomainError(fmt::format("Venant sites near ({:.6g}, {:.6g}, {:.6g}) are coplanar; use the cell+faces "
                                  "neighbourhood",
                                  x0.x(), x0.y(), x0.z()));
  }
  // Null-space form of min |A q|^2 + lambda |q|^2 subject to C q = b. The
  // constraint block has four columns and A only a few rows, so the cost is
  // linear in the number of sites.
  Eigen::HouseholderQR<Eigen::MatrixXd> hqr(c.transpose());
  const Eigen::MatrixXd q1 = hqr.householderQ() * Eigen::MatrixXd::Identity(n, 4);
  const Eigen::Matrix4d r = hqr.matrixQR().topRows(4).triangularView<Eigen::Upper>();
  Eigen::Matrix<double, 4, 3> b = Eigen::Matrix<double, 4, 3>::Zero();
  b.bottomRows(3).diagonal().setConstant(1.0 / h);
  const Eigen::MatrixXd particular = q1 * r.transpose().triangularView<Eigen::Lower>().solve(b);
  Eigen::MatrixXd basis = particular;
  if (a.rows() > 0) {
    Eigen::MatrixXd at = a.transpose();
    at -= q1 * (q1.transpose() * at);
    Eigen::MatrixXd gram = at.transpose() * at;
    gram.diagonal().array() += cfg.lambda;
    const Eigen::MatrixXd w = gram.completeOrthogonalDecomposition().solve(a * particular);
    basis -= at * w;
  }
  const Eigen::VectorXd sol = basis * dipole.moment;

  std::vector<Monopole> out;
  out.reserve(sites.size());
  for (Eigen::Index j = 0; j < n; ++j) out.push_back({sites[static_cast<std::size_t>(j)], sol[j]});
  return out;
}

std::vector<GridSource> source_grid(const CutCellPartition& partition, const CompartmentModel& model,
                                    int compartment, double spacing, const Vec3& anchor) {
  if (!(spacing > 0.0)) throw ConfigError("source grid spacing must be positive");
  if (compartment < 0 || compartment >= static_cast<int>(model.size())) {
    throw ConfigError(fmt::format("source compartment {} does not exist", compartment));
  }
  const auto& mesh = partition.mesh();
  const Box b = mesh.bounds();
  std::array<long, 3> lo{};
  std::array<long, 3> hi{};
  for (int d = 0; d < 3; ++d) {
    lo[d] = static_cast<long>(std::ceil((b.lo[d] - anchor[d]) / spacing));
    hi[d] = static_cast<long>(std::floor((b.hi[d] - anchor[d]) / spacing));
  }
  const auto& ls = model[static_cast<std::size_t>(compartment)].level_set;
  std::vector<GridSource> out;
  for (long k = lo[2]; k <= hi[2]; ++k) {
    for (long j = lo[1]; j <= hi[1]; ++j) {
      for (long i = lo[0]; i <= hi[0]; ++i) {
        const Vec3 p = anchor + spacing * Vec3(static_cast<double>(i), static_cast<double>(j), static_cast<double>(k));
        if (model.label(p) != compartment || partition.label(p) != compartment) continue;
        const double phi = ls.value_or_outside(p);
        if (!(phi < 0.0)) continue;
        out.push_back({p, -phi, -phi < mesh.h()});
      }
    }
  }
  if (out.empty()) {
    throw DomainError(fmt::format("source grid with spacing {} mm has no points in compartment '{}'", spacing,
                                  model[static_cast<std::size_t>(compartment)].name));
  }
  spdlog::debug("source grid: {} points", out.size());
  return out;
}

std::vector<GridSource> source_grid(const CutCellPartition& partition, const CompartmentModel& model,
                                    int compartment, double spacing) {
  return source_grid(partition, model, compartment, spacing, partition.mesh().origin());
}

std::vector<Dipole> read_dipoles(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  std::vector<Dipole> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::vector<double> v;
    double x = 0;
    while (ss >> x) v.push_back(x);
    if (!ss.eof()) throw IoError(fmt::format("{}:{}: not a number", path.string(), lineno));
    if (v.empty()) continue;
    if (v.size() != 3 && v.size() != 6) {
      throw IoError(fmt::format("{}:{}: expected `x y z [mx my mz]`", path.string(), lineno));
    }
    Dipole d{Vec3(v[0], v[1], v[2]), Vec3::Zero()};
    if (v.size() == 6) d.moment = Vec3(v[3], v[4], v[5]);
    out.push_back(d);
  }
  return out;
}

void write_dipoles(const std::filesystem::path& path, std::span<const Dipole> dipoles) {
  std::ofstream out(path);
  if (!out) throw IoError(fmt::format("cannot open {} for writing", path.string()));
  for (const auto& d : dipoles) {
    out << fmt::format("{:.17g} {:.17g} {:.17g} {:.17g} {:.17g} {:.17g}\n", d.position.x(), d.position.y(),
                       d.position.z(), d.moment.x(), d.moment.y(), d.moment.z());
  }
}

}  // namespace cutfem
