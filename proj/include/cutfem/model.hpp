#ifndef CUTFEM_MODEL_HPP
#define CUTFEM_MODEL_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cutfem/level_set.hpp"

namespace cutfem {

struct Compartment {
  std::string name;
  LevelSetField level_set;
  Mat3 conductivity = Mat3::Identity();  // S/m
};

/// Ordered compartments, innermost first. Compartment i is the region where
/// its own level set is negative and every earlier level set is non-negative.
class CompartmentModel {
 public:
  CompartmentModel() = default;
  explicit CompartmentModel(std::vector<Compartment> compartments);

  std::size_t size() const { return compartments_.size(); }
  const Compartment& operator[](std::size_t i) const { return compartments_[i]; }
  const std::vector<Compartment>& compartments() const { return compartments_; }

  /// Compartment containing p, or -1 outside every compartment. Zero values
  /// count as inside.
  int label(const Vec3& p) const;

  /// Index of the compartment electrodes attach to (the last one).
  int outermost() const { return static_cast<int>(compartments_.size()) - 1; }

  /// Union of the bounded inside regions; throws if any level set is unbounded.
  Box bounding_box() const;

 private:
  std::vector<Compartment> compartments_;
};

/// Isotropic conductivity tensor.
inline Mat3 isotropic(double sigma) { return sigma * Mat3::Identity(); }

using CellIndex = std::int64_t;
using VertexIndex = std::int64_t;

/// Regular axis-aligned hexahedral background mesh with cubic cells of edge h.
class BackgroundMesh {
 public:
  BackgroundMesh() = default;
  BackgroundMesh(const Vec3& origin, double h, const std::array<int, 3>& dims);

  /// Smallest mesh of edge h covering box, padded by `padding` cells per side.
  static BackgroundMesh covering(const Box& box, double h, int padding = 1);

  const Vec3& origin() const { return origin_; }
  double h() const { return h_; }
  const std::array<int, 3>& dims() const { return dims_; }

  CellIndex cell_count() const {
    return static_cast<CellIndex>(dims_[0]) * dims_[1] * dims_[2];
  }
  VertexIndex vertex_count() const {
    return static_cast<VertexIndex>(dims_[0] + 1) * (dims_[1] + 1) * (dims_[2] + 1);
  }

  CellIndex cell_index(int i, int j, int k) const {
    return i + static_cast<CellIndex>(dims_[0]) * (j + static_cast<CellIndex>(dims_[1]) * k);
  }
  std::array<int, 3> cell_coords(CellIndex c) const {
    const int i = static_cast<int>(c % dims_[0]);
    const CellIndex r = c / dims_[0];
    return {i, static_cast<int>(r % dims_[1]), static_cast<int>(r / dims_[1])};
  }
  VertexIndex vertex_index(int i, int j, int k) const {
    return i + static_cast<VertexIndex>(dims_[0] + 1) *
                   (j + static_cast<VertexIndex>(dims_[1] + 1) * k);
  }
  std::array<int, 3> vertex_coords(VertexIndex v) const {
    const int i = static_cast<int>(v % (dims_[0] + 1));
    const VertexIndex r = v / (dims_[0] + 1);
    return {i, static_cast<int>(r % (dims_[1] + 1)), static_cast<int>(r / (dims_[1] + 1))};
  }

  /// Vertices in lexicographic corner order: corner bit d set means +h along axis d.
  std::array<VertexIndex, 8> cell_vertices(CellIndex c) const;
  Vec3 cell_origin(CellIndex c) const;
  Vec3 vertex_position(VertexIndex v) const;
  Box bounds() const { return {origin_, origin_ + h_ * Vec3(dims_[0], dims_[1], dims_[2])}; }

  /// Cell containing p (points on shared faces go to the upper cell, clamped
  /// at the mesh boundary), or -1 outside the mesh.
  CellIndex locate(const Vec3& p) const;

  /// Neighbour across the face normal to `axis` in direction side (+1/-1), or -1.
  CellIndex neighbor(CellIndex c, int axis, int side) const;

  bool covers(const CompartmentModel& model) const;

 private:
  Vec3 origin_ = Vec3::Zero();
  double h_ = 1.0;
  std::array<int, 3> dims_{1, 1, 1};
};

}  // namespace cutfem

#endif
