#include "cutfem/partition.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include <spdlog/spdlog.h>

#include "cutfem/error.hpp"

namespace cutfem {

namespace {

constexpr int kUndecided = -2;

bool inside(const LevelSetField& ls, const Vec3& p) { return ls.value_or_outside(p) <= 0.0; }

// Bisection along the segment from a point inside to a point outside, closed
// by linear interpolation inside the final bracket.
Vec3 edge_root(const LevelSetField& ls, const Vec3& in, const Vec3& out, double tol) {
  const Vec3 d = out - in;
  const double len = d.norm();
  double lo = 0.0;
  double hi = 1.0;
  double f_lo = ls.value_or_outside(in);
  double f_hi = ls.value_or_outside(out);
  while ((hi - lo) * len > tol) {
    const double mid = 0.5 * (lo + hi);
    const double f = ls.value_or_outside(in + mid * d);
    if (f <= 0.0) {
      lo = mid;
      f_lo = f;
    } else {
      hi = mid;
      f_hi = f;
    }
  }
  double t = 0.5 * (lo + hi);
  if (std::isfinite(f_lo) && std::isfinite(f_hi) && f_hi > f_lo) {
    t = lo + (hi - lo) * (-f_lo / (f_hi - f_lo));
  }
  return in + t * d;
}

// Kuhn decomposition of an axis-aligned cube into six tetrahedra sharing the
// main diagonal.
std::array<Tetrahedron, 6> kuhn_tets(const Vec3& lo, double s) {
  static constexpr std::array<std::array<int, 3>, 6> kPerms{
      {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
  std::array<Tetrahedron, 6> tets;
  for (std::size_t t = 0; t < kPerms.size(); ++t) {
    Vec3 v = lo;
    tets[t][0] = v;
    for (int step = 0; step < 3; ++step) {
      v[kPerms[t][step]] += s;
      tets[t][step + 1] = v;
    }
  }
  return tets;
}

// Prism with triangles (a0,a1,a2) and (b0,b1,b2), lateral edges ai-bi.
void push_prism(std::vector<Tetrahedron>& out, const Vec3& a0, const Vec3& a1, const Vec3& a2,
                const Vec3& b0, const Vec3& b1, const Vec3& b2) {
  out.push_back({a0, a1, a2, b2});
  out.push_back({a0, a1, b1, b2});
  out.push_back({a0, b0, b1, b2});
}

struct SplitResult {
  std::vector<Tetrahedron> in;
  std::vector<Tetrahedron> out;
  std::vector<Triangle> surface;
};

SplitResult split_tet(const Tetrahedron& t, const std::array<bool, 4>& is_in,
                      const LevelSetField& ls, double tol) {
  std::array<int, 4> ins{};
  std::array<int, 4> outs{};
  int ni = 0;
  int no = 0;
  for (int v = 0; v < 4; ++v) {
    if (is_in[v]) {
      ins[ni++] = v;
    } else {
      outs[no++] = v;
    }
  }
  auto root = [&](int a, int b) { return edge_root(ls, t[a], t[b], tol); };
  SplitResult r;
  if (ni == 1 || ni == 3) {
    // Single vertex `apex` separated from the other three.
    const bool apex_in = ni == 1;
    const int apex = apex_in ? ins[0] : outs[0];
    std::array<int, 3> base{};
    if (apex_in) {
      base = {outs[0], outs[1], outs[2]};
    } else {
      base = {ins[0], ins[1], ins[2]};
    }
    const Vec3 p0 = apex_in ? root(apex, base[0]) : root(base[0], apex);
    const Vec3 p1 = apex_in ? root(apex, base[1]) : root(base[1], apex);
    const Vec3 p2 = apex_in ? root(apex, base[2]) : root(base[2], apex);
    auto& small = apex_in ? r.in : r.out;
    auto& large = apex_in ? r.out : r.in;
    small.push_back({t[apex], p0, p1, p2});
    push_prism(large, p0, p1, p2, t[base[0]], t[base[1]], t[base[2]]);
    r.surface.push_back({p0, p1, p2});
  } else {
    const int a = ins[0];
    const int b = ins[1];
    const int c = outs[0];
    const int d = outs[1];
    const Vec3 pac = root(a, c);
    const Vec3 pad = root(a, d);
    const Vec3 pbc = root(b, c);
    const Vec3 pbd = root(b, d);
    // Both wedges triangulate the quad pac-pad-pbd-pbc along pac-pbd.
    push_prism(r.in, t[a], pac, pad, t[b], pbc, pbd);
    push_prism(r.out, t[c], pac, pbc, t[d], pad, pbd);
    r.surface.push_back({pac, pad, pbd});
    r.surface.push_back({pac, pbd, pbc});
  }
  return r;
}

double total_volume(const std::vector<Tetrahedron>& tets) {
  double v = 0.0;
  for (const auto& t : tets) v += tet_volume(t);
  return v;
}

Vec3 oriented_normal(const Triangle& tri, const LevelSetField& ls) {
  Vec3 n = (tri[1] - tri[0]).cross(tri[2] - tri[0]);
  const double len = n.norm();
  if (len > 0.0) n /= len;
  const Vec3 centroid = (tri[0] + tri[1] + tri[2]) / 3.0;
  Vec3 g;
  try {
    g = ls.gradient(centroid);
  } catch (const DomainError&) {
    g = Vec3::Zero();
  }
  if (n.dot(g) < 0.0) n = -n;
  return n;
}

// Cuts a pending boundary triangle of an earlier compartment by the current
// level set. Inside pieces become interfaces with compartment `current`.
void split_triangle(const Triangle& tri, const LevelSetField& ls, double tol, double min_area,
                    std::vector<Triangle>& in, std::vector<Triangle>& out, int& merged) {
  std::array<bool, 3> is_in{};
  int ni = 0;
  for (int v = 0; v < 3; ++v) {
    is_in[v] = inside(ls, tri[v]);
    ni += is_in[v] ? 1 : 0;
  }
  if (ni == 3) {
    in.push_back(tri);
    return;
  }
  if (ni == 0) {
    out.push_back(tri);
    return;
  }
  // Rotate so vertex 0 is the odd one.
  const bool odd_in = ni == 1;
  int odd = 0;
  for (int v = 0; v < 3; ++v) {
    if (is_in[v] == odd_in) odd = v;
  }
  const Vec3& a = tri[odd];
  const Vec3& b = tri[(odd + 1) % 3];
  const Vec3& c = tri[(odd + 2) % 3];
  const Vec3 pab = odd_in ? edge_root(ls, a, b, tol) : edge_root(ls, b, a, tol);
  const Vec3 pac = odd_in ? edge_root(ls, a, c, tol) : edge_root(ls, c, a, tol);
  std::vector<Triangle> single{{a, pab, pac}};
  std::vector<Triangle> quad{{pab, b, c}, {pab, c, pac}};
  double single_area = triangle_area(single[0]);
  double quad_area = triangle_area(quad[0]) + triangle_area(quad[1]);
  auto& single_dst = odd_in ? in : out;
  auto& quad_dst = odd_in ? out : in;
  if (single_area < min_area || quad_area < min_area) {
    ++merged;
    (single_area >= quad_area ? single_dst : quad_dst).push_back(tri);
    return;
  }
  single_dst.insert(single_dst.end(), single.begin(), single.end());
  quad_dst.insert(quad_dst.end(), quad.begin(), quad.end());
}

struct Piece {
  Tetrahedron tet;
  int label;
};

struct PendingFacet {
  Triangle tri;
  Vec3 normal;
  int inner;
};

// Cuts the six Kuhn tetrahedra of one sub-cube by all level sets in order.
void cut_subcell(const Vec3& lo, double s, const CompartmentModel& model, double tol,
                 double min_volume, double min_area, CutCell& result, double& exterior) {
  std::vector<Piece> pieces;
  for (const auto& t : kuhn_tets(lo, s)) pieces.push_back({t, kUndecided});
  std::vector<PendingFacet> pending;

  for (std::size_t i = 0; i < model.size(); ++i) {
    const auto& ls = model[i].level_set;
    const int label = static_cast<int>(i);

    std::vector<PendingFacet> still_pending;
    for (const auto& f : pending) {
      std::vector<Triangle> in;
      std::vector<Triangle> out;
      split_triangle(f.tri, ls, tol, min_area, in, out, result.merged);
      for (const auto& tri : in) result.facets.push_back({tri, f.normal, f.inner, label});
      for (const auto& tri : out) still_pending.push_back({tri, f.normal, f.inner});
    }
    pending = std::move(still_pending);

    std::vector<Piece> next;
    next.reserve(pieces.size());
    for (const auto& p : pieces) {
      if (p.label != kUndecided) {
        next.push_back(p);
        continue;
      }
      std::array<bool, 4> is_in{};
      int ni = 0;
      for (int v = 0; v < 4; ++v) {
        is_in[v] = inside(ls, p.tet[v]);
        ni += is_in[v] ? 1 : 0;
      }
      if (ni == 4) {
        next.push_back({p.tet, label});
        continue;
      }
      if (ni == 0) {
        next.push_back(p);
        continue;
      }
      auto split = split_tet(p.tet, is_in, ls, tol);
      const double vin = total_volume(split.in);
      const double vout = total_volume(split.out);
      if (vin < min_volume || vout < min_volume) {
        ++result.merged;
        next.push_back({p.tet, vin >= vout ? label : kUndecided});
        // A flat inside sheet is the boundary of an inside neighbour: keep its
        // surface so the interface is not lost.
        if (vin < vout) {
          for (const auto& tri : split.surface) {
            if (triangle_area(tri) <= min_area) continue;
            pending.push_back({tri, oriented_normal(tri, ls), label});
          }
        }
        continue;
      }
      // Prism triangulations collapse to flat tetrahedra when a root lands on
      // a vertex; those carry no volume and are dropped.
      const double flat = 1e-3 * min_volume;
      for (const auto& t : split.in) {
        if (tet_volume(t) > flat) next.push_back({t, label});
      }
      for (const auto& t : split.out) {
        if (tet_volume(t) > flat) next.push_back({t, kUndecided});
      }
      for (const auto& tri : split.surface) {
        if (triangle_area(tri) <= min_area) continue;
        pending.push_back({tri, oriented_normal(tri, ls), label});
      }
    }
    pieces = std::move(next);
  }

  for (const auto& f : pending) result.facets.push_back({f.tri, f.normal, f.inner, kExterior});
  for (const auto& p : pieces) {
    const double v = tet_volume(p.tet);
    if (p.label == kUndecided) {
      exterior += v;
    } else {
      result.snippets.push_back({p.tet, p.label});
      result.volume[static_cast<std::size_t>(p.label)] += v;
    }
  }
}

}  // namespace

CutCellPartition::CutCellPartition(BackgroundMesh mesh, std::size_t compartments,
                                   std::vector<CellClass> classes, std::vector<CutCell> cut_cells,
                                   std::vector<MeshFace> ghost_faces)
    : mesh_(std::move(mesh)),
      compartments_(compartments),
      classes_(std::move(classes)),
      cut_cells_(std::move(cut_cells)),
      cut_slot_(classes_.size(), -1),
      ghost_faces_(std::move(ghost_faces)) {
  for (std::size_t s = 0; s < cut_cells_.size(); ++s) {
    cut_slot_[static_cast<std::size_t>(cut_cells_[s].cell)] = static_cast<std::int64_t>(s);
  }
}

bool CutCellPartition::supports(CellIndex c, int compartment) const {
  const auto& cls = cell_class(c);
  switch (cls.kind) {
    case CellKind::kInterior:
      return cls.compartment == compartment;
    case CellKind::kCut:
      return cut(c)->has(compartment);
    case CellKind::kExterior:
      break;
  }
  return false;
}

double CutCellPartition::volume(CellIndex c, int compartment) const {
  const auto& cls = cell_class(c);
  if (cls.kind == CellKind::kInterior) {
    return cls.compartment == compartment ? std::pow(mesh_.h(), 3) : 0.0;
  }
  if (cls.kind == CellKind::kCut) {
    const auto* cc = cut(c);
    return cc->has(compartment) ? cc->volume[static_cast<std::size_t>(compartment)] : 0.0;
  }
  return 0.0;
}

int CutCellPartition::label(const Vec3& p) const {
  const CellIndex c = mesh_.locate(p);
  if (c < 0) return kExterior;
  const auto& cls = cell_class(c);
  if (cls.kind != CellKind::kCut) return cls.kind == CellKind::kInterior ? cls.compartment : kExterior;
  const auto* cc = cut(c);
  for (const auto& b : cc->boxes) {
    if (b.box.contains(p, 1e-12 * mesh_.h())) return b.compartment;
  }
  // Largest minimum barycentric coordinate picks the containing (or nearest)
  // tetrahedron. Tets whose bounding box misses p cannot contain it, so they
  // only matter when no tet does.
  const auto min_barycentric = [&](const Snippet& s) {
    Eigen::Matrix3d m;
    m.col(0) = s.tet[1] - s.tet[0];
    m.col(1) = s.tet[2] - s.tet[0];
    m.col(2) = s.tet[3] - s.tet[0];
    const Vec3 l = m.fullPivLu().solve(p - s.tet[0]);
    return std::min({1.0 - l.sum(), l.x(), l.y(), l.z()});
  };
  const double tol = 1e-9 * mesh_.h();
  int best_label = kExterior;
  double best = -1e-9;
  for (const auto& s : cc->snippets) {
    const Vec3 lo = s.tet[0].cwiseMin(s.tet[1]).cwiseMin(s.tet[2]).cwiseMin(s.tet[3]);
    const Vec3 hi = s.tet[0].cwiseMax(s.tet[1]).cwiseMax(s.tet[2]).cwiseMax(s.tet[3]);
    if (!Box{lo, hi}.contains(p, tol)) continue;
    const double lmin = min_barycentric(s);
    if (lmin > best) {
      best = lmin;
      best_label = s.compartment;
    }
  }
  if (best >= 0.0) return best_label;
  best_label = kExterior;
  best = -1e-9;
  for (const auto& s : cc->snippets) {
    const double lmin = min_barycentric(s);
    if (lmin > best) {
      best = lmin;
      best_label = s.compartment;
    }
  }
  return best_label;
}

std::size_t CutCellPartition::snippet_count() const {
  std::size_t n = 0;
  for (const auto& c : cut_cells_) n += c.snippets.size() + c.boxes.size();
  return n;
}

int CutCellPartition::merged_count() const {
  int n = 0;
  for (const auto& c : cut_cells_) n += c.merged;
  return n;
}

CellClass classify_cell(const BackgroundMesh& mesh, CellIndex cell, const CompartmentModel& model,
                        const CutOptions& options) {
  const int n = 1 << std::max(options.classify_levels, 0);
  const double step = mesh.h() / n;
  const Vec3 lo = mesh.cell_origin(cell);
  const std::size_t m = model.size();
  std::vector<int> seen_in(m, 0);
  std::vector<int> seen_out(m, 0);
  for (int k = 0; k <= n; ++k) {
    for (int j = 0; j <= n; ++j) {
      for (int i = 0; i <= n; ++i) {
        const Vec3 p = lo + step * Vec3(i, j, k);
        for (std::size_t c = 0; c < m; ++c) {
          if (inside(model[c].level_set, p)) {
            seen_in[c] = 1;
          } else {
            seen_out[c] = 1;
          }
        }
      }
    }
  }
  for (std::size_t c = 0; c < m; ++c) {
    if (seen_in[c] && seen_out[c]) return {CellKind::kCut, kExterior};
  }
  for (std::size_t c = 0; c < m; ++c) {
    if (seen_in[c]) return {CellKind::kInterior, static_cast<int>(c)};
  }
  return {CellKind::kExterior, kExterior};
}

CutCell cut_cell(const BackgroundMesh& mesh, CellIndex cell, const CompartmentModel& model,
                 const CutOptions& options) {
  if (options.refinement < 0 || options.refinement > 3) {
    throw ConfigError("cut-cell refinement must lie in 0..3");
  }
  const double h = mesh.h();
  const int n = 1 << options.refinement;
  const double s = h / n;
  const double tol = options.bisection_tol * h;
  const double min_volume = options.min_volume * h * h * h;
  const double min_area = options.min_volume * h * h;
  const Vec3 lo = mesh.cell_origin(cell);

  CutCell result;
  result.cell = cell;
  result.volume.assign(model.size(), 0.0);
  double exterior = 0.0;

  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        const Vec3 sub = lo + s * Vec3(i, j, k);
        std::array<int, 8> labels{};
        for (int corner = 0; corner < 8; ++corner) {
          const Vec3 p = sub + s * Vec3(corner & 1, (corner >> 1) & 1, (corner >> 2) & 1);
          labels[corner] = model.label(p);
        }
        const bool uniform =
            std::all_of(labels.begin(), labels.end(), [&](int l) { return l == labels[0]; });
        if (uniform) {
          const double v = s * s * s;
          if (labels[0] == kExterior) {
            exterior += v;
          } else {
            result.boxes.push_back({{sub, sub + Vec3::Constant(s)}, labels[0]});
            result.volume[static_cast<std::size_t>(labels[0])] += v;
          }
          continue;
        }
        cut_subcell(sub, s, model, tol, min_volume, min_area, result, exterior);
      }
    }
  }
  result.exterior_volume = exterior;
  if (result.merged > 0) {
    spdlog::debug("cell {}: merged {} degenerate cut pieces", cell, result.merged);
  }
  return result;
}

CutCellPartition build_partition(const BackgroundMesh& mesh, const CompartmentModel& model,
                                 const CutOptions& options, Execution exec) {
  if (!mesh.covers(model)) {
    throw ConfigError("background mesh does not cover the support of all level sets");
  }
  const CellIndex ncells = mesh.cell_count();
  std::vector<CellClass> classes(static_cast<std::size_t>(ncells));
  if (exec == Execution::kParallel) {
#pragma omp parallel for schedule(dynamic, 256)
    for (CellIndex c = 0; c < ncells; ++c) {
      classes[static_cast<std::size_t>(c)] = classify_cell(mesh, c, model, options);
    }
  } else {
    for (CellIndex c = 0; c < ncells; ++c) {
      classes[static_cast<std::size_t>(c)] = classify_cell(mesh, c, model, options);
    }
  }

  std::vector<CellIndex> cut_ids;
  for (CellIndex c = 0; c < ncells; ++c) {
    if (classes[static_cast<std::size_t>(c)].kind == CellKind::kCut) cut_ids.push_back(c);
  }
  std::vector<CutCell> cut_cells(cut_ids.size());
  const auto ncut = static_cast<std::int64_t>(cut_ids.size());
  if (exec == Execution::kParallel) {
#pragma omp parallel for schedule(dynamic, 16)
    for (std::int64_t s = 0; s < ncut; ++s) {
      cut_cells[static_cast<std::size_t>(s)] =
          cut_cell(mesh, cut_ids[static_cast<std::size_t>(s)], model, options);
    }
  } else {
    for (std::int64_t s = 0; s < ncut; ++s) {
      cut_cells[static_cast<std::size_t>(s)] =
          cut_cell(mesh, cut_ids[static_cast<std::size_t>(s)], model, options);
    }
  }

  std::vector<MeshFace> faces;
  for (CellIndex c : cut_ids) {
    for (int axis = 0; axis < 3; ++axis) {
      for (int side : {-1, 1}) {
        const CellIndex nb = mesh.neighbor(c, axis, side);
        if (nb < 0) continue;
        faces.push_back(side < 0 ? MeshFace{nb, c, axis} : MeshFace{c, nb, axis});
      }
    }
  }
  std::sort(faces.begin(), faces.end(), [](const MeshFace& a, const MeshFace& b) {
    return a.lower != b.lower ? a.lower < b.lower : a.axis < b.axis;
  });
  faces.erase(std::unique(faces.begin(), faces.end()), faces.end());

  CutCellPartition partition(mesh, model.size(), std::move(classes), std::move(cut_cells),
                             std::move(faces));
  if (const int merged = partition.merged_count(); merged > 0) {
    spdlog::debug("cut cells: merged {} degenerate pieces into neighbouring compartments", merged);
  }
  return partition;
}

std::vector<std::vector<CellIndex>> build_submeshes(const CutCellPartition& partition) {
  const std::size_t m = partition.compartment_count();
  std::vector<std::vector<CellIndex>> sub(m);
  const CellIndex ncells = partition.mesh().cell_count();
  for (CellIndex c = 0; c < ncells; ++c) {
    const auto& cls = partition.cell_class(c);
    if (cls.kind == CellKind::kInterior) {
      sub[static_cast<std::size_t>(cls.compartment)].push_back(c);
    } else if (cls.kind == CellKind::kCut) {
      const auto* cc = partition.cut(c);
      for (std::size_t i = 0; i < m; ++i) {
        if (cc->has(static_cast<int>(i))) sub[i].push_back(c);
      }
    }
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (sub[i].empty()) {
      throw ConfigError("compartment " + std::to_string(i) + " has an empty submesh");
    }
  }
  return sub;
}

std::vector<std::vector<double>> interface_areas(const CutCellPartition& partition) {
  const std::size_t m = partition.compartment_count();
  std::vector<std::vector<double>> area(m, std::vector<double>(m + 1, 0.0));
  for (const auto& cc : partition.cut_cells()) {
    for (const auto& f : cc.facets) {
      const std::size_t outer = f.outer == kExterior ? m : static_cast<std::size_t>(f.outer);
      area[static_cast<std::size_t>(f.inner)][outer] += triangle_area(f.tri);
    }
  }
  return area;
}

std::vector<double> compartment_volumes(const CutCellPartition& partition) {
  const std::size_t m = partition.compartment_count();
  std::vector<double> vol(m, 0.0);
  const double cell_volume = std::pow(partition.mesh().h(), 3);
  const CellIndex ncells = partition.mesh().cell_count();
  for (CellIndex c = 0; c < ncells; ++c) {
    const auto& cls = partition.cell_class(c);
    if (cls.kind == CellKind::kInterior) {
      vol[static_cast<std::size_t>(cls.compartment)] += cell_volume;
    } else if (cls.kind == CellKind::kCut) {
      const auto* cc = partition.cut(c);
      for (std::size_t i = 0; i < m; ++i) vol[i] += cc->volume[i];
    }
  }
  return vol;
}

}  // namespace cutfem
