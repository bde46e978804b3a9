#ifndef CUTFEM_CONFIG_HPP
#define CUTFEM_CONFIG_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cutfem/assembly.hpp"
#include "cutfem/krylov.hpp"
#include "cutfem/model.hpp"
#include "cutfem/partition.hpp"
#include "cutfem/sources.hpp"

namespace cutfem {

struct MeshConfig {
  double h = 4.0;                              // mm
  std::optional<Vec3> origin;                  // with dims; otherwise the mesh covers the model
  std::optional<std::array<int, 3>> dims;
  int padding = 1;
  int refinement = 1;

  friend bool operator==(const MeshConfig&, const MeshConfig&) = default;
};

enum class ShapeKind { kSphere, kPlane, kGrid };

struct CompartmentConfig {
  std::string name;
  ShapeKind shape = ShapeKind::kSphere;
  Vec3 center = Vec3::Zero();  // sphere
  double radius = 0.0;
  Vec3 normal = Vec3::UnitZ();  // plane
  double offset = 0.0;
  std::filesystem::path grid;  // LSGRID file
  std::optional<double> probability_threshold;  // grid holds a tissue probability map
  Mat3 sigma = Mat3::Identity();

  friend bool operator==(const CompartmentConfig&, const CompartmentConfig&) = default;
};

struct FemConfig {
  NitscheVariant variant = NitscheVariant::kNonSymmetric;
  double gamma = 16.0;
  double ghost_gamma = 0.1;
  int volume_order = 4;
  int facet_order = 5;

  friend bool operator==(const FemConfig&, const FemConfig&) = default;
};

struct SolverConfig {
  double tolerance = 1e-8;
  int max_iterations = 10000;
  Preconditioner preconditioner = Preconditioner::kJacobi;
  int block_size = 8;

  friend bool operator==(const SolverConfig&, const SolverConfig&) = default;
};

struct ElectrodeConfig {
  std::filesystem::path file;  // positions, one per line
  int fibonacci = 0;           // otherwise: this many points on the outermost sphere
  double max_snap = -1.0;      // mm, negative for 2h
  int reference = 0;

  friend bool operator==(const ElectrodeConfig&, const ElectrodeConfig&) = default;
};

struct SourceConfig {
  std::filesystem::path file;  // dipole positions
  double spacing = 0.0;        // otherwise: regular grid with this spacing
  std::optional<Vec3> anchor;  // grid anchor, default the model centre
  std::string compartment;     // default the innermost one
  int order = 2;
  double lambda = 1e-6;
  int quadrature_order = 2;
  VenantNeighborhood neighborhood = VenantNeighborhood::kCellAndFaceNeighbors;

  friend bool operator==(const SourceConfig&, const SourceConfig&) = default;
};

struct OutputConfig {
  std::filesystem::path directory = "out";
  bool csv = false;

  friend bool operator==(const OutputConfig&, const OutputConfig&) = default;
};

struct RunConfig {
  MeshConfig mesh;
  std::vector<CompartmentConfig> compartments;  // innermost first
  FemConfig fem;
  SolverConfig solver;
  ElectrodeConfig electrodes;
  SourceConfig sources;
  int analytic_terms = 200;
  OutputConfig output;
  int threads = 0;  // 0 keeps the OpenMP default

  friend bool operator==(const RunConfig&, const RunConfig&) = default;

  /// Throws ConfigError on inconsistent values or missing files.
  void validate() const;
  /// Index of sources.compartment (or 0 when unset).
  int source_compartment() const;

  CompartmentModel build_model() const;
  CutOptions cut_options() const;
  AssemblyOptions assembly_options() const;
  SolverOptions solver_options() const;
  VenantConfig venant() const;
};

/// INI text with sections [mesh], [compartment NAME] (innermost first),
/// [fem], [solver], [electrodes], [sources], [analytic], [output], [run].
/// Relative file paths are resolved against base_dir.
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);
/// Canonical INI text; parse_config(to_ini(c)) == c.
std::string to_ini(const RunConfig& config);

/// FNV-1a 64-bit hash of the canonical text without the [output] and [run]
/// sections, as 16 hex digits. Settings that cannot change results are left
/// out so reruns with another thread count carry the same tag.
std::string config_hash(const RunConfig& config);
std::uint64_t fnv1a(std::string_view bytes);

}  // namespace cutfem

#endif
