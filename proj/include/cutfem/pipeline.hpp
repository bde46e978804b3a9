#ifndef CUTFEM_PIPELINE_HPP
#define CUTFEM_PIPELINE_HPP

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cutfem/config.hpp"
#include "cutfem/error.hpp"
#include "cutfem/metrics.hpp"

namespace cutfem {

/// Failure inside a named pipeline stage; what() reads "stage: message".
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& message)
      : Error(stage + ": " + message), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct ForwardReport {
  std::string config_hash;
  double h = 0.0;
  std::int64_t cells = 0;
  std::int64_t cut_cells = 0;
  std::int64_t snippets = 0;
  std::int64_t dofs = 0;
  std::vector<std::int64_t> dofs_per_compartment;
  int electrodes = 0;
  int sources = 0;
  double max_snap = 0.0;  // mm
  int min_iterations = 0;
  int median_iterations = 0;
  int max_iterations = 0;
  double max_residual = 0.0;
  int threads = 1;
  std::vector<StageTiming> timings;

  double seconds(const std::string& stage) const;
  std::string to_json() const;
};

struct ForwardResult {
  LeadField leadfield;  // zero mean per column
  std::vector<Vec3> electrodes;
  ForwardReport report;
};

/// Geometry, trial space, system, transfer matrix and Venant loads for every
/// source. Stages: driver setup, matrix assembly, solver setup, solving, lead
/// field.
ForwardResult run_forward(const RunConfig& config);

/// Writes leadfield.bin (plus leadfield.csv when enabled), sources.txt and
/// report.json into the output directory.
void write_forward(const RunConfig& config, const ForwardResult& result);

struct ValidationResult {
  std::vector<SourceRecord> records;  // one per source and direction
  std::vector<EccentricityBin> bins;
  double median_rdm = 0.0;
  double median_abs_mag = 0.0;
  std::optional<double> top_band_median_rdm;  // eccentricity 0.96-0.98
  ForwardReport report;
};

/// Radial and two tangential directions per source, numerical against the
/// concentric-sphere series. In self-test mode the analytic potentials are
/// compared with themselves. Throws ConfigError for non-spherical models.
ValidationResult run_validate(const RunConfig& config, bool self_test = false);
ValidationResult validate_leadfield(const RunConfig& config, const ForwardResult& forward, bool self_test = false);

/// validation.txt (one record per line) and bins.txt.
void write_validation(const RunConfig& config, const ValidationResult& result);

struct ConvergenceRow {
  double h = 0.0;
  std::int64_t dofs = 0;
  int band_count = 0;
  double band_median_rdm = 0.0;
  double band_median_abs_mag = 0.0;
};

struct ConvergenceResult {
  std::vector<ConvergenceRow> rows;  // in the given h order
  bool monotone = false;             // band median RDM strictly decreasing
  double band_lo = 0.5;
  double band_hi = 0.9;
};

/// Repeats validation for every mesh size. Needs at least two sizes and at
/// least one source in the band for each.
ConvergenceResult run_convergence(const RunConfig& config, std::span<const double> h_list, double band_lo = 0.5,
                                  double band_hi = 0.9);
void write_convergence(const RunConfig& config, const ConvergenceResult& result);

/// Whitespace-separated numbers; `#` starts a comment.
std::vector<double> read_vector(const std::filesystem::path& path);

/// Radial, then two tangential unit vectors for a source at offset d from the
/// sphere centre (the axes for d = 0).
std::array<Vec3, 3> source_directions(const Vec3& d);

}  // namespace cutfem

#endif
