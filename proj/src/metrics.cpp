#include "cutfem/metrics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <Eigen/Dense>
#include <fmt/format.h>
#include <fmt/os.h>
#include <spdlog/spdlog.h>

#include "cutfem/error.hpp"

namespace cutfem {

namespace {

double norm2(std::span<const double> u) {
  double s = 0.0;
  for (double v : u) s += v * v;
  return std::sqrt(s);
}

}  // namespace

std::vector<double> rereference(std::span<const double> u) {
  std::vector<double> out(u.begin(), u.end());
  if (out.empty()) return out;
  double mean = 0.0;
  for (double v : out) mean += v;
  mean /= static_cast<double>(out.size());
  for (double& v : out) v -= mean;
  return out;
}

double rdm(std::span<const double> u_ref, std::span<const double> u_num) {
  if (u_ref.size() != u_num.size() || u_ref.size() < 2) {
    throw DomainError("rdm needs two vectors of equal length >= 2");
  }
  const auto a = rereference(u_ref);
  const auto b = rereference(u_num);
  const double na = norm2(a);
  const double nb = norm2(b);
  if (na == 0.0 || nb == 0.0) throw DomainError("rdm of a zero potential vector");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] / na - b[i] / nb;
    s += d * d;
  }
  return 50.0 * std::sqrt(s);
}

double mag(std::span<const double> u_ref, std::span<const double> u_num) {
  if (u_ref.size() != u_num.size()) throw DomainError("mag needs two vectors of equal length");
  const double na = norm2(rereference(u_ref));
  if (na == 0.0) throw DomainError("mag with a zero reference vector");
  return 100.0 * (norm2(rereference(u_num)) / na - 1.0);
}

LeadField::LeadField(int e, int s)
    : electrodes(e), sources(s), values(static_cast<std::size_t>(e) * 3 * static_cast<std::size_t>(s), 0.0) {}

std::vector<double> LeadField::column(int col) const {
  std::vector<double> out(static_cast<std::size_t>(electrodes));
  for (int e = 0; e < electrodes; ++e) out[static_cast<std::size_t>(e)] = at(e, col);
  return out;
}

void LeadField::set_column(int col, std::span<const double> u) {
  if (u.size() != static_cast<std::size_t>(electrodes)) throw DomainError("lead-field column length mismatch");
  for (int e = 0; e < electrodes; ++e) at(e, col) = u[static_cast<std::size_t>(e)];
}

void LeadField::rereference() {
  for (int c = 0; c < columns(); ++c) {
    double mean = 0.0;
    for (int e = 0; e < electrodes; ++e) mean += at(e, c);
    mean /= static_cast<double>(electrodes);
    for (int e = 0; e < electrodes; ++e) at(e, c) -= mean;
  }
}

void LeadField::check_finite() const {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw DomainError(fmt::format("lead field entry {} (electrode {}, column {}) is not finite", i,
                                    i / static_cast<std::size_t>(columns()), i % static_cast<std::size_t>(columns())));
    }
  }
}

void write_leadfield(const std::filesystem::path& path, const LeadField& l, const std::string& tag) {
  static_assert(std::endian::native == std::endian::little, "lead-field files assume a little-endian host");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot open {} for writing", path.string()));
  out << fmt::format("LEADFIELD {} {} 3", l.electrodes, l.sources);
  if (!tag.empty()) out << ' ' << tag;
  out << '\n';
  out.write(reinterpret_cast<const char*>(l.values.data()),
            static_cast<std::streamsize>(l.values.size() * sizeof(double)));
  if (!out) throw IoError(fmt::format("failed writing {}", path.string()));
}

LeadField read_leadfield(const std::filesystem::path& path, std::string* tag) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  std::string header;
  std::getline(in, header);
  std::istringstream ss(header);
  std::string magic;
  int e = 0;
  int s = 0;
  int three = 0;
  if (!(ss >> magic >> e >> s >> three) || magic != "LEADFIELD" || e <= 0 || s <= 0 || three != 3) {
    throw IoError(fmt::format("{}: bad lead-field header '{}'", path.string(), header));
  }
  std::string rest;
  ss >> rest;
  if (tag) *tag = rest;
  LeadField l(e, s);
  const auto bytes = static_cast<std::streamsize>(l.values.size() * sizeof(double));
  in.read(reinterpret_cast<char*>(l.values.data()), bytes);
  if (in.gcount() != bytes) throw IoError(fmt::format("{}: truncated lead-field data", path.string()));
  return l;
}

void write_leadfield_csv(const std::filesystem::path& path, const LeadField& l, const std::string& tag) {
  auto out = fmt::output_file(path.string());
  out.print("# LEADFIELD {} {} 3", l.electrodes, l.sources);
  if (!tag.empty()) out.print(" {}", tag);
  out.print("\n");
  for (int e = 0; e < l.electrodes; ++e) {
    for (int c = 0; c < l.columns(); ++c) {
      if (c > 0) out.print(",");
      out.print("{:.17g}", l.at(e, c));
    }
    out.print("\n");
  }
}

ScanResult dipole_scan(const LeadField& lf, std::span<const double> data, Execution exec) {
  if (data.size() != static_cast<std::size_t>(lf.electrodes)) {
    throw DomainError(fmt::format("data has {} entries for {} electrodes", data.size(), lf.electrodes));
  }
  const Eigen::Map<const Eigen::VectorXd> d(data.data(), static_cast<Eigen::Index>(data.size()));
  const double dd = d.squaredNorm();
  if (dd == 0.0) throw DomainError("dipole scan of zero data");
  const int n = lf.sources;
  std::vector<double> gof(static_cast<std::size_t>(n), std::numeric_limits<double>::quiet_NaN());
  std::vector<Vec3> moment(static_cast<std::size_t>(n), Vec3::Zero());
  const auto fit = [&](int s) {
    Eigen::MatrixXd g(lf.electrodes, 3);
    for (int e = 0; e < lf.electrodes; ++e) {
      for (int k = 0; k < 3; ++k) g(e, k) = lf.at(e, 3 * s + k);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(g);
    qr.setThreshold(1e-10);
    if (qr.rank() < 3) return;
    const Eigen::Vector3d m = qr.solve(d);
    const double res = (d - g * m).squaredNorm();
    gof[static_cast<std::size_t>(s)] = 100.0 * (1.0 - res / dd);
    moment[static_cast<std::size_t>(s)] = m;
  };
  if (exec == Execution::kParallel) {
#pragma omp parallel for schedule(static)
    for (int s = 0; s < n; ++s) fit(s);
  } else {
    for (int s = 0; s < n; ++s) fit(s);
  }
  ScanResult out;
  int skipped = 0;
  for (int s = 0; s < n; ++s) {
    const double g = gof[static_cast<std::size_t>(s)];
    if (std::isnan(g)) {
      ++skipped;
      continue;
    }
    if (out.source < 0 || g > out.gof) {
      out.source = s;
      out.gof = g;
      out.moment = moment[static_cast<std::size_t>(s)];
    }
  }
  if (skipped > 0) spdlog::warn("dipole scan: skipped {} sources with rank-deficient lead fields", skipped);
  if (out.source < 0) throw DomainError("dipole scan: every source has a rank-deficient lead field");
  out.gof_per_source = std::move(gof);
  return out;
}

double median(std::vector<double> v) {
  if (v.empty()) throw DomainError("median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::vector<SourceRecord> in_band(std::span<const SourceRecord> records, double lo, double hi) {
  std::vector<SourceRecord> out;
  for (const auto& r : records) {
    if (r.eccentricity >= lo && r.eccentricity <= hi) out.push_back(r);
  }
  return out;
}

std::vector<EccentricityBin> bin_by_eccentricity(std::span<const SourceRecord> records, double width,
                                                 double top) {
  if (!(width > 0.0)) throw ConfigError("bin width must be positive");
  const int bins = static_cast<int>(std::ceil(top / width - 1e-9));
  std::vector<std::vector<const SourceRecord*>> members(static_cast<std::size_t>(bins));
  for (const auto& r : records) {
    if (r.eccentricity < 0.0 || r.eccentricity > top + 1e-12) continue;
    const int b = std::min(bins - 1, static_cast<int>(std::floor(r.eccentricity / width + 1e-12)));
    members[static_cast<std::size_t>(b)].push_back(&r);
  }
  std::vector<EccentricityBin> out;
  for (int b = 0; b < bins; ++b) {
    const auto& m = members[static_cast<std::size_t>(b)];
    if (m.empty()) continue;
    EccentricityBin bin;
    bin.lo = b * width;
    bin.hi = std::min(top, (b + 1) * width);
    bin.count = static_cast<int>(m.size());
    std::vector<double> r;
    std::vector<double> g;
    for (const auto* rec : m) {
      r.push_back(rec->rdm);
      g.push_back(rec->mag);
      bin.max_rdm = std::max(bin.max_rdm, rec->rdm);
      bin.max_abs_mag = std::max(bin.max_abs_mag, std::abs(rec->mag));
    }
    bin.median_rdm = median(r);
    bin.median_mag = median(g);
    bin.flagged = bin.lo >= 0.96 - 1e-9 && bin.hi <= 0.98 + 1e-9;
    out.push_back(bin);
  }
  return out;
}

}  // namespace cutfem
