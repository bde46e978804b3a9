#include "cutfem/model.hpp"

#include <algorithm>
#include <cmath>

#include "cutfem/error.hpp"

namespace cutfem {

CompartmentModel::CompartmentModel(std::vector<Compartment> compartments)
    : compartments_(std::move(compartments)) {
  if (compartments_.empty()) throw ConfigError("compartment model needs at least one compartment");
  for (const auto& c : compartments_) {
    const Mat3& s = c.conductivity;
    if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-12 * s.cwiseAbs().maxCoeff()) {
      throw ConfigError("conductivity of compartment '" + c.name + "' is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Mat3> eig(s);
    if (!(eig.eigenvalues().minCoeff() > 0.0)) {
      throw ConfigError("conductivity of compartment '" + c.name + "' is not positive definite");
    }
  }
}

int CompartmentModel::label(const Vec3& p) const {
  for (std::size_t i = 0; i < compartments_.size(); ++i) {
    if (compartments_[i].level_set.value_or_outside(p) <= 0.0) return static_cast<int>(i);
  }
  return -1;
}

Box CompartmentModel::bounding_box() const {
  Box box{Vec3::Constant(INFINITY), Vec3::Constant(-INFINITY)};
  for (const auto& c : compartments_) {
    const auto b = c.level_set.inside_bounds();
    if (!b) throw ConfigError("compartment '" + c.name + "' has an unbounded level set");
    box.lo = box.lo.cwiseMin(b->lo);
    box.hi = box.hi.cwiseMax(b->hi);
  }
  return box;
}

BackgroundMesh::BackgroundMesh(const Vec3& origin, double h, const std::array<int, 3>& dims)
    : origin_(origin), h_(h), dims_(dims) {
  if (!(h > 0.0)) throw ConfigError("background mesh needs a positive cell size");
  for (int d : dims) {
    if (d < 1) throw ConfigError("background mesh needs at least one cell per axis");
  }
}

BackgroundMesh BackgroundMesh::covering(const Box& box, double h, int padding) {
  std::array<int, 3> dims{};
  Vec3 origin;
  for (int d = 0; d < 3; ++d) {
    const int n = static_cast<int>(std::ceil((box.hi[d] - box.lo[d]) / h - 1e-9));
    dims[d] = std::max(n, 1) + 2 * padding;
    const double center = 0.5 * (box.lo[d] + box.hi[d]);
    origin[d] = center - 0.5 * h * dims[d];
  }
  return BackgroundMesh(origin, h, dims);
}

std::array<VertexIndex, 8> BackgroundMesh::cell_vertices(CellIndex c) const {
  const auto [i, j, k] = cell_coords(c);
  std::array<VertexIndex, 8> v{};
  for (int corner = 0; corner < 8; ++corner) {
    v[corner] = vertex_index(i + (corner & 1), j + ((corner >> 1) & 1), k + ((corner >> 2) & 1));
  }
  return v;
}

Vec3 BackgroundMesh::cell_origin(CellIndex c) const {
  const auto [i, j, k] = cell_coords(c);
  return origin_ + h_ * Vec3(i, j, k);
}

Vec3 BackgroundMesh::vertex_position(VertexIndex v) const {
  const auto [i, j, k] = vertex_coords(v);
  return origin_ + h_ * Vec3(i, j, k);
}

CellIndex BackgroundMesh::locate(const Vec3& p) const {
  std::array<int, 3> idx{};
  for (int d = 0; d < 3; ++d) {
    const double t = (p[d] - origin_[d]) / h_;
    const double slack = 1e-10;
    if (!(t >= -slack && t <= dims_[d] + slack)) return -1;
    idx[d] = std::clamp(static_cast<int>(std::floor(t)), 0, dims_[d] - 1);
  }
  return cell_index(idx[0], idx[1], idx[2]);
}

CellIndex BackgroundMesh::neighbor(CellIndex c, int axis, int side) const {
  auto idx = cell_coords(c);
  idx[axis] += side;
  if (idx[axis] < 0 || idx[axis] >= dims_[axis]) return -1;
  return cell_index(idx[0], idx[1], idx[2]);
}

bool BackgroundMesh::covers(const CompartmentModel& model) const {
  const Box mesh = bounds();
  for (const auto& c : model.compartments()) {
    const auto b = c.level_set.inside_bounds();
    if (!b) continue;
    const double tol = 1e-9 * h_;
    if (!mesh.contains(b->lo, tol) || !mesh.contains(b->hi, tol)) return false;
  }
  return true;
}

}  // namespace cutfem
