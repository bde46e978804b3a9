#ifndef CUTFEM_LEVEL_SET_HPP
#define CUTFEM_LEVEL_SET_HPP

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace cutfem {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Axis-aligned box [lo, hi].
struct Box {
  Vec3 lo;
  Vec3 hi;

  bool contains(const Vec3& p, double tol = 0.0) const {
    return (p.array() >= lo.array() - tol).all() && (p.array() <= hi.array() + tol).all();
  }
};

/// |x - center| - radius.
struct SphereLevelSet {
  Vec3 center = Vec3::Zero();
  double radius = 1.0;
};

/// normal . x - offset, normal of unit length; negative on the side opposite to the normal.
struct HalfSpaceLevelSet {
  Vec3 normal = Vec3::UnitX();
  double offset = 0.0;
};

/// Vertex samples on a regular grid, evaluated by trilinear interpolation.
/// Values are stored x-fastest: index = i + nx * (j + ny * k).
struct SampledLevelSet {
  Vec3 origin = Vec3::Zero();
  Vec3 spacing = Vec3::Ones();
  std::array<int, 3> dims{2, 2, 2};
  std::vector<float> values;

  Box extent() const {
    return {origin, origin + Vec3(spacing.x() * (dims[0] - 1), spacing.y() * (dims[1] - 1),
                                  spacing.z() * (dims[2] - 1))};
  }
};

/// Signed implicit surface of one compartment: negative inside, zero on the
/// boundary, positive outside.
class LevelSetField {
 public:
  using Kind = std::variant<SphereLevelSet, HalfSpaceLevelSet, SampledLevelSet>;

  LevelSetField() = default;
  LevelSetField(Kind kind) : kind_(std::move(kind)) {}  // NOLINT(google-explicit-constructor)

  static LevelSetField sphere(const Vec3& center, double radius);
  static LevelSetField half_space(const Vec3& normal, double offset);

  const Kind& kind() const { return kind_; }
  bool is_sphere() const { return std::holds_alternative<SphereLevelSet>(kind_); }
  const SphereLevelSet* as_sphere() const { return std::get_if<SphereLevelSet>(&kind_); }

  /// Throws DomainError for a sampled grid queried outside its extent.
  double value(const Vec3& p) const;
  Vec3 gradient(const Vec3& p) const;

  /// Like value(), but points outside a sampled grid report +infinity
  /// (outside the compartment) instead of throwing.
  double value_or_outside(const Vec3& p) const;

  /// Bounding box of the region where the field can be negative, if bounded.
  std::optional<Box> inside_bounds() const;

 private:
  Kind kind_ = SphereLevelSet{};
};

/// Free-function form of LevelSetField::value.
double eval_level_set(const LevelSetField& field, const Vec3& point);

/// Reads an LSGRID volume: ASCII header `LSGRID nx ny nz ox oy oz sx sy sz`
/// then nx*ny*nz little-endian float32 values in x-fastest order.
SampledLevelSet read_lsgrid(const std::filesystem::path& path);
void write_lsgrid(const std::filesystem::path& path, const SampledLevelSet& grid);

/// Converts a tissue probability map into level-set values threshold - p.
SampledLevelSet level_set_from_probability(SampledLevelSet probability, double threshold = 0.4);

}  // namespace cutfem

#endif
