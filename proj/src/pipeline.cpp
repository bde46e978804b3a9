#include "cutfem/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/os.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "cutfem/analytic.hpp"
#include "cutfem/assembly.hpp"
#include "cutfem/electrodes.hpp"
#include "cutfem/parallel.hpp"
#include "cutfem/partition.hpp"
#include "cutfem/sources.hpp"
#include "cutfem/transfer.hpp"
#include "cutfem/trial_space.hpp"

namespace cutfem {

namespace {

class Stages {
 public:
  explicit Stages(std::vector<StageTiming>& out) : out_(out) {}

  template <class F>
  auto run(const std::string& name, F&& f) {
    spdlog::info("stage: {}", name);
    const auto t0 = std::chrono::steady_clock::now();
    const auto record = [&] {
      out_.push_back({name, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
    };
    try {
      if constexpr (std::is_void_v<decltype(f())>) {
        f();
        record();
      } else {
        auto r = f();
        record();
        return r;
      }
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(name, e.what());
    }
  }

 private:
  std::vector<StageTiming>& out_;
};

std::string header_line(const std::string& hash) { return fmt::format("# config {}\n", hash); }

void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("cannot create output directory {}: {}", dir.string(), ec.message()));
}

SphereModel sphere_for(const RunConfig& config, const CompartmentModel& model) {
  return sphere_model_from(model, config.analytic_terms);
}

// Longer series for sources close to the innermost boundary.
std::vector<double> analytic_potentials(SphereModel sphere, const Dipole& d, std::span<const Vec3> electrodes) {
  for (;;) {
    try {
      return sphere_forward(sphere, d, electrodes);
    } catch (const DomainError&) {
      if (sphere.terms >= 6400 || sphere.eccentricity(d.position) >= 1.0) throw;
      sphere.terms *= 2;
    }
  }
}

}  // namespace

double ForwardReport::seconds(const std::string& stage) const {
  for (const auto& t : timings) {
    if (t.stage == stage) return t.seconds;
  }
  return 0.0;
}

std::string ForwardReport::to_json() const {
  nlohmann::ordered_json j;
  j["config_hash"] = config_hash;
  j["h_mm"] = h;
  j["cells"] = cells;
  j["cut_cells"] = cut_cells;
  j["snippets"] = snippets;
  j["dofs"] = dofs;
  j["dofs_per_compartment"] = dofs_per_compartment;
  j["electrodes"] = electrodes;
  j["sources"] = sources;
  j["max_electrode_snap_mm"] = max_snap;
  j["solver_iterations"] = {{"min", min_iterations}, {"median", median_iterations}, {"max", max_iterations}};
  j["max_relative_residual"] = max_residual;
  j["threads"] = threads;
  auto& t = j["stage_seconds"];
  t = nlohmann::ordered_json::object();
  double total = 0.0;
  for (const auto& s : timings) {
    t[s.stage] = s.seconds;
    total += s.seconds;
  }
  j["total_seconds"] = total;
  return j.dump(2) + "\n";
}

ForwardResult run_forward(const RunConfig& config) {
  ForwardResult out;
  auto& report = out.report;
  Stages stages(report.timings);

  struct Geometry {
    CompartmentModel model;
    CutCellPartition partition;
    TrialSpace space;
    std::vector<Vec3> sources;
  };
  const Geometry geo = stages.run("driver setup", [&] {
    config.validate();
    if (config.threads > 0) set_thread_count(config.threads);
    Geometry g;
    g.model = config.build_model();
    const BackgroundMesh mesh = config.mesh.dims
                                    ? BackgroundMesh(*config.mesh.origin, config.mesh.h, *config.mesh.dims)
                                    : BackgroundMesh::covering(g.model.bounding_box(), config.mesh.h,
                                                               config.mesh.padding);
    g.partition = build_partition(mesh, g.model, config.cut_options());
    g.space = build_trial_space(mesh, build_submeshes(g.partition));
    const int sc = config.source_compartment();
    if (!config.sources.file.empty()) {
      for (const auto& d : read_dipoles(config.sources.file)) g.sources.push_back(d.position);
    } else {
      const Box b = g.model.bounding_box();
      const Vec3 anchor = config.sources.anchor.value_or(0.5 * (b.lo + b.hi));
      for (const auto& s : source_grid(g.partition, g.model, sc, config.sources.spacing, anchor)) {
        g.sources.push_back(s.position);
      }
    }
    if (g.sources.empty()) throw ConfigError("no sources");
    if (!config.electrodes.file.empty()) {
      out.electrodes = read_positions(config.electrodes.file);
    } else {
      const auto& outer = config.compartments.back();
      out.electrodes = fibonacci_sphere(static_cast<std::size_t>(config.electrodes.fibonacci), outer.center,
                                        outer.radius);
    }
    if (out.electrodes.size() < 2) throw ConfigError("at least two electrodes are needed");
    return g;
  });
  const auto& mesh = geo.partition.mesh();
  report.config_hash = config_hash(config);
  report.h = mesh.h();
  report.cells = mesh.cell_count();
  report.cut_cells = static_cast<std::int64_t>(geo.partition.cut_cells().size());
  report.snippets = static_cast<std::int64_t>(geo.partition.snippet_count());
  report.dofs = geo.space.size();
  for (std::size_t i = 0; i < geo.space.compartment_count(); ++i) {
    report.dofs_per_compartment.push_back(geo.space.compartment_size(static_cast<int>(i)));
  }
  report.electrodes = static_cast<int>(out.electrodes.size());
  report.sources = static_cast<int>(geo.sources.size());
  report.threads = thread_count();
  spdlog::info("mesh h = {} mm: {} cells, {} cut, {} snippets, {} DOFs", report.h, report.cells, report.cut_cells,
               report.snippets, report.dofs);

  const SparseSystem system =
      stages.run("matrix assembly", [&] { return assemble_system(geo.space, geo.partition, geo.model, config.assembly_options()); });

  const ElectrodeSet electrodes = stages.run("solver setup", [&] {
    return electrode_restriction(geo.space, geo.partition, geo.model, out.electrodes, config.electrodes.max_snap);
  });
  for (const auto& e : electrodes.electrodes()) report.max_snap = std::max(report.max_snap, e.snap_distance);

  const TransferMatrix transfer = stages.run("solving", [&] {
    if (config.electrodes.reference >= static_cast<int>(electrodes.size())) {
      throw ConfigError(fmt::format("reference electrode {} does not exist", config.electrodes.reference));
    }
    return transfer_matrix(system, electrodes, config.electrodes.reference, config.solver_options());
  });
  if (!transfer.iterations.empty()) {
    auto it = transfer.iterations;
    std::sort(it.begin(), it.end());
    report.min_iterations = it.front();
    report.max_iterations = it.back();
    report.median_iterations = it[it.size() / 2];
    report.max_residual = *std::max_element(transfer.residuals.begin(), transfer.residuals.end());
  }

  out.leadfield = stages.run("lead field", [&] {
    const int ns = static_cast<int>(geo.sources.size());
    LeadField lf(static_cast<int>(electrodes.size()), ns);
    lf.positions = geo.sources;
    const int sc = config.source_compartment();
    const auto venant = config.venant();
    std::vector<std::string> errors(static_cast<std::size_t>(ns));
#pragma omp parallel for schedule(dynamic, 4)
    for (int s = 0; s < ns; ++s) {
      try {
        for (int d = 0; d < 3; ++d) {
          const Dipole dip{geo.sources[static_cast<std::size_t>(s)], Vec3::Unit(d)};
          const auto q = venant_monopoles(dip, geo.partition, geo.model, sc, venant);
          const auto load = assemble_load(geo.space, geo.partition, q, sc);
          lf.set_column(3 * s + d, apply_transfer(transfer, load));
        }
      } catch (const std::exception& e) {
        errors[static_cast<std::size_t>(s)] = e.what();
      }
    }
    for (int s = 0; s < ns; ++s) {
      if (!errors[static_cast<std::size_t>(s)].empty()) {
        throw DomainError(fmt::format("source {}: {}", s, errors[static_cast<std::size_t>(s)]));
      }
    }
    lf.rereference();
    lf.check_finite();
    return lf;
  });
  return out;
}

void write_forward(const RunConfig& config, const ForwardResult& result) {
  const auto& dir = config.output.directory;
  ensure_directory(dir);
  const std::string tag = "config=" + result.report.config_hash;
  write_leadfield(dir / "leadfield.bin", result.leadfield, tag);
  if (config.output.csv) write_leadfield_csv(dir / "leadfield.csv", result.leadfield, tag);
  {
    auto f = fmt::output_file((dir / "sources.txt").string());
    f.print("{}", header_line(result.report.config_hash));
    for (const auto& p : result.leadfield.positions) f.print("{:.17g} {:.17g} {:.17g}\n", p.x(), p.y(), p.z());
  }
  std::ofstream rep(dir / "report.json");
  if (!rep) throw IoError(fmt::format("cannot write {}", (dir / "report.json").string()));
  rep << result.report.to_json();
}

std::array<Vec3, 3> source_directions(const Vec3& d) {
  const double n = d.norm();
  if (n == 0.0) return {Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()};
  const Vec3 r = d / n;
  const Vec3 helper = std::abs(r.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
  const Vec3 t1 = r.cross(helper).normalized();
  return {r, t1, r.cross(t1)};
}

ValidationResult validate_leadfield(const RunConfig& config, const ForwardResult& forward, bool self_test) {
  ValidationResult out;
  out.report = forward.report;
  Stages stages(out.report.timings);
  stages.run("analytic", [&] {
    const SphereModel sphere = sphere_for(config, config.build_model());
    const auto& lf = forward.leadfield;
    const int ns = lf.sources;
    out.records.resize(static_cast<std::size_t>(3 * ns));
    std::vector<std::string> errors(static_cast<std::size_t>(ns));
#pragma omp parallel for schedule(dynamic, 4)
    for (int s = 0; s < ns; ++s) {
      try {
        const Vec3 p = lf.positions[static_cast<std::size_t>(s)];
        const auto dirs = source_directions(p - sphere.center);
        for (int k = 0; k < 3; ++k) {
          const auto ana = analytic_potentials(sphere, {p, dirs[static_cast<std::size_t>(k)]}, forward.electrodes);
          std::vector<double> num(ana.size());
          if (self_test) {
            num = ana;
          } else {
            for (int e = 0; e < lf.electrodes; ++e) {
              num[static_cast<std::size_t>(e)] = dirs[static_cast<std::size_t>(k)].x() * lf.at(e, 3 * s) +
                                                 dirs[static_cast<std::size_t>(k)].y() * lf.at(e, 3 * s + 1) +
                                                 dirs[static_cast<std::size_t>(k)].z() * lf.at(e, 3 * s + 2);
            }
          }
          auto& r = out.records[static_cast<std::size_t>(3 * s + k)];
          r.position = p;
          r.eccentricity = sphere.eccentricity(p);
          r.direction = dirs[static_cast<std::size_t>(k)];
          r.rdm = rdm(ana, num);
          r.mag = mag(ana, num);
        }
      } catch (const std::exception& e) {
        errors[static_cast<std::size_t>(s)] = e.what();
      }
    }
    for (int s = 0; s < ns; ++s) {
      if (!errors[static_cast<std::size_t>(s)].empty()) {
        throw DomainError(fmt::format("source {}: {}", s, errors[static_cast<std::size_t>(s)]));
      }
    }
  });
  std::vector<double> r;
  std::vector<double> m;
  for (const auto& rec : out.records) {
    r.push_back(rec.rdm);
    m.push_back(std::abs(rec.mag));
  }
  out.median_rdm = median(r);
  out.median_abs_mag = median(m);
  out.bins = bin_by_eccentricity(out.records);
  const auto top = in_band(out.records, 0.96, 0.98);
  if (!top.empty()) {
    std::vector<double> t;
    for (const auto& rec : top) t.push_back(rec.rdm);
    out.top_band_median_rdm = median(t);
  }
  return out;
}

ValidationResult run_validate(const RunConfig& config, bool self_test) {
  // Reject non-spherical models before the expensive part.
  {
    config.validate();
    std::vector<StageTiming> t;
    Stages(t).run("driver setup", [&] { sphere_for(config, config.build_model()); });
  }
  return validate_leadfield(config, run_forward(config), self_test);
}

void write_validation(const RunConfig& config, const ValidationResult& result) {
  const auto& dir = config.output.directory;
  ensure_directory(dir);
  {
    auto f = fmt::output_file((dir / "validation.txt").string());
    f.print("{}", header_line(result.report.config_hash));
    f.print("# x y z eccentricity dx dy dz rdm_percent mag_percent\n");
    for (const auto& r : result.records) {
      f.print("{:.6f} {:.6f} {:.6f} {:.6f} {:.6f} {:.6f} {:.6f} {:.6e} {:.6e}\n", r.position.x(), r.position.y(),
              r.position.z(), r.eccentricity, r.direction.x(), r.direction.y(), r.direction.z(), r.rdm, r.mag);
    }
  }
  auto f = fmt::output_file((dir / "bins.txt").string());
  f.print("{}", header_line(result.report.config_hash));
  f.print("# median rdm {:.6g} %, median |mag| {:.6g} %", result.median_rdm, result.median_abs_mag);
  if (result.top_band_median_rdm) f.print(", median rdm 0.96-0.98 {:.6g} %", *result.top_band_median_rdm);
  f.print("\n# ecc_lo ecc_hi count median_rdm max_rdm median_mag max_abs_mag flagged\n");
  for (const auto& b : result.bins) {
    f.print("{:.2f} {:.2f} {} {:.6e} {:.6e} {:.6e} {:.6e} {}\n", b.lo, b.hi, b.count, b.median_rdm, b.max_rdm,
            b.median_mag, b.max_abs_mag, b.flagged ? 1 : 0);
  }
}

ConvergenceResult run_convergence(const RunConfig& config, std::span<const double> h_list, double band_lo,
                                  double band_hi) {
  if (h_list.size() < 2) throw ConfigError("convergence needs at least two mesh sizes");
  ConvergenceResult out;
  out.band_lo = band_lo;
  out.band_hi = band_hi;
  for (const double h : h_list) {
    RunConfig c = config;
    c.mesh.h = h;
    c.mesh.origin.reset();
    c.mesh.dims.reset();
    const auto v = run_validate(c);
    const auto band = in_band(v.records, band_lo, band_hi);
    if (band.empty()) {
      throw StageError("convergence", fmt::format("no sources with eccentricity in [{}, {}] at h = {} mm", band_lo,
                                                  band_hi, h));
    }
    ConvergenceRow row;
    row.h = h;
    row.dofs = v.report.dofs;
    row.band_count = static_cast<int>(band.size());
    std::vector<double> r;
    std::vector<double> m;
    for (const auto& rec : band) {
      r.push_back(rec.rdm);
      m.push_back(std::abs(rec.mag));
    }
    row.band_median_rdm = median(r);
    row.band_median_abs_mag = median(m);
    spdlog::info("convergence: h = {} mm, median RDM {:.4g} % over {} records", h, row.band_median_rdm,
                 row.band_count);
    out.rows.push_back(row);
  }
  out.monotone = true;
  for (std::size_t i = 1; i < out.rows.size(); ++i) {
    if (!(out.rows[i].band_median_rdm < out.rows[i - 1].band_median_rdm)) out.monotone = false;
  }
  return out;
}

void write_convergence(const RunConfig& config, const ConvergenceResult& result) {
  const auto& dir = config.output.directory;
  ensure_directory(dir);
  auto f = fmt::output_file((dir / "convergence.txt").string());
  f.print("{}", header_line(config_hash(config)));
  f.print("# eccentricity band {} - {}, monotone {}\n", result.band_lo, result.band_hi, result.monotone ? "yes" : "no");
  f.print("# h_mm dofs count median_rdm median_abs_mag\n");
  for (const auto& r : result.rows) {
    f.print("{:.6g} {} {} {:.6e} {:.6e}\n", r.h, r.dofs, r.band_count, r.band_median_rdm, r.band_median_abs_mag);
  }
}

std::vector<double> read_vector(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  std::vector<double> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    double x = 0;
    while (ss >> x) out.push_back(x);
    if (!ss.eof()) throw IoError(fmt::format("{}:{}: not a number", path.string(), lineno));
  }
  return out;
}

}  // namespace cutfem
