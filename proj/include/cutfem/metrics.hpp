#ifndef CUTFEM_METRICS_HPP
#define CUTFEM_METRICS_HPP

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cutfem/level_set.hpp"
#include "cutfem/parallel.hpp"

namespace cutfem {

/// Copy with the mean removed.
std::vector<double> rereference(std::span<const double> u);

/// Relative difference measure in percent, 0..100, on re-referenced vectors.
double rdm(std::span<const double> u_ref, std::span<const double> u_num);
/// Magnitude error in percent, >= -100, on re-referenced vectors.
double mag(std::span<const double> u_ref, std::span<const double> u_num);

/// Electrodes x (3 sources) potentials per unit moment, electrode-major:
/// value(e, 3 s + d) is electrode e for source s with moment along axis d.
struct LeadField {
  int electrodes = 0;
  int sources = 0;
  std::vector<double> values;
  std::vector<Vec3> positions;  // per source, may be empty

  LeadField() = default;
  LeadField(int electrodes, int sources);

  int columns() const { return 3 * sources; }
  double& at(int e, int col) { return values[static_cast<std::size_t>(e) * columns() + col]; }
  double at(int e, int col) const { return values[static_cast<std::size_t>(e) * columns() + col]; }
  std::vector<double> column(int col) const;
  void set_column(int col, std::span<const double> u);

  /// Subtracts the column means.
  void rereference();
  /// Throws DomainError on NaN or Inf.
  void check_finite() const;
};

/// Binary file: `LEADFIELD s n 3 [tag]` and a newline, then little-endian
/// float64 in electrode-major order.
void write_leadfield(const std::filesystem::path& path, const LeadField& l, const std::string& tag = {});
LeadField read_leadfield(const std::filesystem::path& path, std::string* tag = nullptr);
/// Comma-separated rows per electrode after a `# LEADFIELD s n 3 [tag]` line.
void write_leadfield_csv(const std::filesystem::path& path, const LeadField& l, const std::string& tag = {});

struct ScanResult {
  int source = -1;
  double gof = 0.0;  // percent
  Vec3 moment = Vec3::Zero();
  std::vector<double> gof_per_source;  // NaN for skipped sources
};

/// Least-squares fit of every source's three columns to the data; the best
/// source has the largest goodness of fit (lowest index on ties).
ScanResult dipole_scan(const LeadField& leadfield, std::span<const double> data,
                       Execution exec = Execution::kParallel);

struct SourceRecord {
  Vec3 position;
  double eccentricity = 0.0;
  Vec3 direction;
  double rdm = 0.0;
  double mag = 0.0;
};

struct EccentricityBin {
  double lo = 0.0;
  double hi = 0.0;
  int count = 0;
  double median_rdm = 0.0;
  double max_rdm = 0.0;
  double median_mag = 0.0;
  double max_abs_mag = 0.0;
  bool flagged = false;  // 0.96-0.98, the most realistic band
};

double median(std::vector<double> v);

/// Statistics per eccentricity bin of the given width up to `top`; bins
/// without records are omitted.
std::vector<EccentricityBin> bin_by_eccentricity(std::span<const SourceRecord> records, double width = 0.02,
                                                 double top = 0.98);

/// Records with lo <= eccentricity <= hi.
std::vector<SourceRecord> in_band(std::span<const SourceRecord> records, double lo, double hi);

}  // namespace cutfem

#endif
