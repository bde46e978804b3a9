#include "cutfem/level_set.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "cutfem/error.hpp"

namespace cutfem {

namespace {

struct TrilinearStencil {
  std::array<int, 3> cell;
  Vec3 local;  // in [0,1]^3
};

TrilinearStencil locate(const SampledLevelSet& g, const Vec3& p) {
  TrilinearStencil s{};
  for (int d = 0; d < 3; ++d) {
    const double t = (p[d] - g.origin[d]) / g.spacing[d];
    const int n = g.dims[d] - 1;
    const double slack = 1e-12 * n;
    if (!(t >= -slack && t <= n + slack)) {
      std::ostringstream msg;
      msg << "level set sample grid queried outside its extent at (" << p.x() << ", " << p.y()
          << ", " << p.z() << ")";
      throw DomainError(msg.str());
    }
    int c = static_cast<int>(std::floor(t));
    c = std::clamp(c, 0, n - 1);
    s.cell[d] = c;
    s.local[d] = std::clamp(t - c, 0.0, 1.0);
  }
  return s;
}

double sample(const SampledLevelSet& g, int i, int j, int k) {
  return g.values[static_cast<std::size_t>(i) +
                  static_cast<std::size_t>(g.dims[0]) *
                      (static_cast<std::size_t>(j) + static_cast<std::size_t>(g.dims[1]) * k)];
}

std::array<double, 8> corner_values(const SampledLevelSet& g, const std::array<int, 3>& c) {
  std::array<double, 8> v{};
  for (int corner = 0; corner < 8; ++corner) {
    v[corner] = sample(g, c[0] + (corner & 1), c[1] + ((corner >> 1) & 1), c[2] + ((corner >> 2) & 1));
  }
  return v;
}

double trilinear(const SampledLevelSet& g, const Vec3& p) {
  const auto s = locate(g, p);
  const auto v = corner_values(g, s.cell);
  double result = 0.0;
  for (int corner = 0; corner < 8; ++corner) {
    double w = 1.0;
    for (int d = 0; d < 3; ++d) w *= ((corner >> d) & 1) ? s.local[d] : 1.0 - s.local[d];
    result += w * v[corner];
  }
  return result;
}

Vec3 trilinear_gradient(const SampledLevelSet& g, const Vec3& p) {
  const auto s = locate(g, p);
  const auto v = corner_values(g, s.cell);
  Vec3 grad = Vec3::Zero();
  for (int corner = 0; corner < 8; ++corner) {
    for (int d = 0; d < 3; ++d) {
      double w = ((corner >> d) & 1) ? 1.0 : -1.0;
      for (int e = 0; e < 3; ++e) {
        if (e != d) w *= ((corner >> e) & 1) ? s.local[e] : 1.0 - s.local[e];
      }
      grad[d] += w * v[corner] / g.spacing[d];
    }
  }
  return grad;
}

// Bounding box of all sample cells touching a non-positive sample, clipped to
// the grid extent.
std::optional<Box> negative_region(const SampledLevelSet& g) {
  std::array<int, 3> lo{g.dims[0], g.dims[1], g.dims[2]};
  std::array<int, 3> hi{-1, -1, -1};
  for (int k = 0; k < g.dims[2]; ++k) {
    for (int j = 0; j < g.dims[1]; ++j) {
      for (int i = 0; i < g.dims[0]; ++i) {
        if (sample(g, i, j, k) > 0.0) continue;
        const std::array<int, 3> idx{i, j, k};
        for (int d = 0; d < 3; ++d) {
          lo[d] = std::min(lo[d], std::max(idx[d] - 1, 0));
          hi[d] = std::max(hi[d], std::min(idx[d] + 1, g.dims[d] - 1));
        }
      }
    }
  }
  if (hi[0] < 0) return std::nullopt;
  Box b;
  for (int d = 0; d < 3; ++d) {
    b.lo[d] = g.origin[d] + lo[d] * g.spacing[d];
    b.hi[d] = g.origin[d] + hi[d] * g.spacing[d];
  }
  return b;
}

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

}  // namespace

LevelSetField LevelSetField::sphere(const Vec3& center, double radius) {
  if (!(radius > 0.0)) throw ConfigError("sphere level set needs a positive radius");
  return LevelSetField(SphereLevelSet{center, radius});
}

LevelSetField LevelSetField::half_space(const Vec3& normal, double offset) {
  const double n = normal.norm();
  if (!(n > 0.0)) throw ConfigError("half-space level set needs a non-zero normal");
  return LevelSetField(HalfSpaceLevelSet{normal / n, offset / n});
}

double LevelSetField::value(const Vec3& p) const {
  return std::visit(Overloaded{
                        [&](const SphereLevelSet& s) { return (p - s.center).norm() - s.radius; },
                        [&](const HalfSpaceLevelSet& h) { return h.normal.dot(p) - h.offset; },
                        [&](const SampledLevelSet& g) { return trilinear(g, p); },
                    },
                    kind_);
}

Vec3 LevelSetField::gradient(const Vec3& p) const {
  return std::visit(Overloaded{
                        [&](const SphereLevelSet& s) -> Vec3 {
                          const Vec3 d = p - s.center;
                          const double r = d.norm();
                          return r > 0.0 ? Vec3(d / r) : Vec3(Vec3::UnitX());
                        },
                        [&](const HalfSpaceLevelSet& h) -> Vec3 { return h.normal; },
                        [&](const SampledLevelSet& g) -> Vec3 { return trilinear_gradient(g, p); },
                    },
                    kind_);
}

double LevelSetField::value_or_outside(const Vec3& p) const {
  if (const auto* g = std::get_if<SampledLevelSet>(&kind_)) {
    if (!g->extent().contains(p, 1e-12 * g->spacing.maxCoeff())) {
      return std::numeric_limits<double>::infinity();
    }
  }
  return value(p);
}

std::optional<Box> LevelSetField::inside_bounds() const {
  return std::visit(Overloaded{
                        [](const SphereLevelSet& s) -> std::optional<Box> {
                          const Vec3 r = Vec3::Constant(s.radius);
                          return Box{s.center - r, s.center + r};
                        },
                        [](const HalfSpaceLevelSet&) -> std::optional<Box> { return std::nullopt; },
                        [](const SampledLevelSet& g) -> std::optional<Box> {
                          return negative_region(g);
                        },
                    },
                    kind_);
}

double eval_level_set(const LevelSetField& field, const Vec3& point) { return field.value(point); }

SampledLevelSet read_lsgrid(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open level set grid " + path.string());
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  std::string magic;
  SampledLevelSet g;
  hs >> magic >> g.dims[0] >> g.dims[1] >> g.dims[2] >> g.origin.x() >> g.origin.y() >>
      g.origin.z() >> g.spacing.x() >> g.spacing.y() >> g.spacing.z();
  if (magic != "LSGRID" || !hs) throw IoError("bad LSGRID header in " + path.string());
  for (int d = 0; d < 3; ++d) {
    if (g.dims[d] < 2 || !(g.spacing[d] > 0.0)) {
      throw IoError("LSGRID needs >= 2 samples and positive spacing per axis: " + path.string());
    }
  }
  const std::size_t count = static_cast<std::size_t>(g.dims[0]) * g.dims[1] * g.dims[2];
  g.values.resize(count);
  std::vector<std::uint32_t> raw(count);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count * 4));
  if (static_cast<std::size_t>(in.gcount()) != count * 4) {
    throw IoError("LSGRID payload truncated in " + path.string());
  }
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits = raw[i];
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
    g.values[i] = std::bit_cast<float>(bits);
  }
  return g;
}

void write_lsgrid(const std::filesystem::path& path, const SampledLevelSet& g) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write level set grid " + path.string());
  out.precision(17);
  out << "LSGRID " << g.dims[0] << ' ' << g.dims[1] << ' ' << g.dims[2] << ' ' << g.origin.x()
      << ' ' << g.origin.y() << ' ' << g.origin.z() << ' ' << g.spacing.x() << ' '
      << g.spacing.y() << ' ' << g.spacing.z() << '\n';
  for (float v : g.values) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
    out.write(reinterpret_cast<const char*>(&bits), 4);
  }
}

SampledLevelSet level_set_from_probability(SampledLevelSet probability, double threshold) {
  for (float& v : probability.values) v = static_cast<float>(threshold - v);
  return probability;
}

}  // namespace cutfem
