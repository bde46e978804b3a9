// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <fmt/os.h>
#include <spdlog/spdlog.h>

#include "cutfem/analytic.hpp"
#include "cutfem/config.hpp"
#include "cutfem/electrodes.hpp"
#include "cutfem/krylov.hpp"
#include "cutfem/metrics.hpp"
#include "cutfem/pipeline.hpp"
#include "cutfem/sources.hpp"
#include "cutfem/transfer.hpp"
#include "support.hpp"

using namespace cutfem;
using testing::Setup;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  return Vec3(g(rng), g(rng), g(rng)).normalized();
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

fs::path workdir() {
  const fs::path dir = fs::temp_directory_path() / "cutfem_acceptance";
  fs::create_directories(dir);
  return dir;
}

// Three-layer concentric sphere: radii 92/86/80 mm, 0.43/0.01/0.33 S/m.
RunConfig sphere_config(double h, const fs::path& dipoles) {
  RunConfig c = parse_config(fmt::format(R"(
[mesh]
h = {}
[compartment brain]
shape = sphere
center = 0 0 0
radius = 80
sigma = 0.33
[compartment skull]
shape = sphere
center = 0 0 0
radius = 86
sigma = 0.01
[compartment scalp]
shape = sphere
center = 0 0 0
radius = 92
sigma = 0.43
[electrodes]
fibonacci = 200
[sources]
file = {}
)",
                                         h, dipoles.string()));
  c.output.directory = workdir() / fmt::format("h{}", h);
  return c;
}

// Twelve sources per eccentricity bin of width 0.02 from 0 to 0.98.
std::vector<Vec3> stratified_sources(double lo, double hi) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vec3> out;
  for (int bin = 0; bin < 49; ++bin) {
    for (int k = 0; k < 12; ++k) {
      const double e = 0.02 * (bin + u(rng));
      const Vec3 dir = random_unit(rng);
      if (e >= lo && e <= hi) out.push_back(80.0 * e * dir);
    }
  }
  return out;
}

fs::path write_sources(const std::string& name, const std::vector<Vec3>& p) {
  const fs::path path = workdir() / name;
  std::vector<Dipole> d;
  for (const auto& x : p) d.push_back({x, Vec3::Zero()});
  write_dipoles(path, d);
  return path;
}

struct SphereRun {
  ValidationResult validation;
  double seconds = 0.0;
};

SphereRun sphere_run(double h, const fs::path& dipoles) {
  const auto t0 = Clock::now();
  const RunConfig c = sphere_config(h, dipoles);
  const auto forward = run_forward(c);
  SphereRun r;
  r.validation = validate_leadfield(c, forward);
  r.seconds = seconds_since(t0);
  return r;
}

std::optional<SphereRun> h4_cache;

const SphereRun& h4_run() {
  if (!h4_cache) h4_cache = sphere_run(4.0, write_sources("stratified.txt", stratified_sources(0.0, 1.0)));
  return *h4_cache;
}

Outcome sphere_validation() {
  const auto& r = h4_run();
  const auto& v = r.validation;
  const double top = v.top_band_median_rdm.value_or(NAN);
  const bool pass = v.report.sources >= 500 && v.median_rdm <= 3.0 && v.median_abs_mag <= 5.0 && top <= 5.0;
  return {pass, fmt::format("{} sources x 3 directions, {} electrodes, h 4 mm: median RDM {:.3f} %, median |MAG| "
                            "{:.3f} %, 0.96-0.98 median RDM {:.3f} %; {:.0f} s",
                            v.report.sources, v.report.electrodes, v.median_rdm, v.median_abs_mag, top, r.seconds)};
}

Outcome refinement_convergence() {
  const auto band = stratified_sources(0.5, 0.9);
  const fs::path file = write_sources("band.txt", band);
  std::vector<double> medians;
  for (double h : {16.0, 8.0}) {
    const auto r = sphere_run(h, file);
    std::vector<double> rdm;
    for (const auto& rec : in_band(r.validation.records, 0.5, 0.9)) rdm.push_back(rec.rdm);
    medians.push_back(median(rdm));
  }
  std::vector<double> rdm;
  for (const auto& rec : in_band(h4_run().validation.records, 0.5, 0.9)) rdm.push_back(rec.rdm);
  medians.push_back(median(rdm));
  const bool pass = medians[0] > medians[1] && medians[1] > medians[2];
  return {pass, fmt::format("band 0.5-0.9 median RDM at h 16/8/4 mm: {:.3f} / {:.3f} / {:.3f} %", medians[0],
                            medians[1], medians[2])};
}

Dipole random_brain_dipole(const Setup& s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Vec3 c(129, 127, 127);
  for (;;) {
    const Vec3 p = c + 77.0 * Vec3(u(rng), u(rng), u(rng));
    if (s.model.label(p) == 0 && s.partition.label(p) == 0) return {p, random_unit(rng)};
  }
}

Outcome transfer_equivalence() {
  const auto s = Setup::covering(testing::shifted_sphere_model(), 16.0);
  const auto set = electrode_restriction(s.space, s.partition, s.model, fibonacci_sphere(12, Vec3(127, 127, 127), 92.0));
  const auto sys = assemble_system(s.space, s.partition, s.model);
  SolverOptions so;
  so.tolerance = 1e-10;
  const auto t = transfer_matrix(sys, set, 0, so);
  std::mt19937_64 rng(33);
  double worst = 0.0;
  double worst_entry = 0.0;
  for (int k = 0; k < 20; ++k) {
    const Dipole d = random_brain_dipole(s, rng);
    for (int axis = 0; axis < 3; ++axis) {
      const auto q = venant_monopoles({d.position, Vec3::Unit(axis)}, s.partition, s.model, 0);
      const auto f = assemble_load(s.space, s.partition, q, 0);
      const auto via_t = rereference(apply_transfer(t, f));
      const auto direct = rereference(set.evaluate(solve(sys, f, so).x));
      const double scale = max_abs(direct);
      for (std::size_t e = 0; e < direct.size(); ++e) {
        const double diff = std::abs(via_t[e] - direct[e]);
        worst = std::max(worst, diff / scale);
        worst_entry = std::max(worst_entry, diff / std::abs(direct[e]));
      }
    }
  }
  return {worst <= 1e-6, fmt::format("12 electrodes, 20 sources x 3 axes, h 16 mm: max entry error {:.2e} of the "
                                     "column maximum (largest entrywise ratio {:.2e})",
                                     worst, worst_entry)};
}

Outcome patch_test() {
  double worst = 0.0;
  for (auto variant : {NitscheVariant::kNonSymmetric, NitscheVariant::kSymmetric}) {
    const auto s = testing::tilted_bar();
    AssemblyOptions opt;
    opt.variant = variant;
    const auto sys = assemble_system(s.space, s.partition, s.model, opt);
    const auto b = testing::end_flux_load(s, [](const Vec3&) { return -1.0; }, [](const Vec3&) { return 1.0; });
    const auto x = testing::dense_gauged_solve(sys.stiffness, b);
    worst = std::max(worst, testing::gauged_max_error(x, testing::interpolate(s, [](const Vec3& p) { return p.x(); })));
  }
  return {worst <= 1e-7, fmt::format("tilted planar interface, NWIPG and SWIPG: max DOF error {:.2e}", worst)};
}

Outcome matrix_structure() {
  const auto s = Setup::covering(testing::shifted_sphere_model(), 16.0);
  AssemblyOptions sw;
  sw.variant = NitscheVariant::kSymmetric;
  const auto ks = assemble_system(s.space, s.partition, s.model, sw).stiffness;
  const auto kn = assemble_system(s.space, s.partition, s.model).stiffness;
  const double sym = difference_norm_inf(ks, ks.transpose()) / ks.norm_inf();
  double null = 0.0;
  for (const auto* k : {&ks, &kn}) {
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(k->rows());
    null = std::max(null, testing::multiply(*k, ones).cwiseAbs().maxCoeff() / k->norm_inf());
  }
  return {sym <= 1e-10 && null <= 1e-8,
          fmt::format("SWIPG |K-K^T|/|K| {:.2e}, max |K 1|/|K| over both variants {:.2e}", sym, null)};
}

Outcome ghost_stabilization() {
  // Radius 80.04 puts the brain surface 0.04 mm (h/200) from the vertices on the axes.
  const double h = 8.0;
  const CompartmentModel model({{"brain", LevelSetField::sphere(Vec3::Zero(), 80.04), isotropic(0.33)},
                                {"skull", LevelSetField::sphere(Vec3::Zero(), 86.0), isotropic(0.01)},
                                {"scalp", LevelSetField::sphere(Vec3::Zero(), 92.0), isotropic(0.43)}});
  const Setup s(model, BackgroundMesh(Vec3::Constant(-104.0), h, {26, 26, 26}));
  double closest = INFINITY;
  for (VertexIndex v = 0; v < s.mesh.vertex_count(); ++v) {
    const Vec3 p = s.mesh.vertex_position(v);
    for (const auto& c : s.model.compartments()) closest = std::min(closest, std::abs(c.level_set.value(p)));
  }
  AssemblyOptions without;
  without.ghost_gamma = 0.0;
  const auto a = assemble_system(s.space, s.partition, s.model);
  const auto b = assemble_system(s.space, s.partition, s.model, without);
  SolverOptions opt;
  opt.max_iterations = 2000;
  // A solve that does not converge counts as one past the cap.
  const auto iterations = [&](const SparseSystem& sys, const std::vector<double>& f) {
    try {
      return solve(sys, f, opt).iterations;
    } catch (const SolverError&) {
      return opt.max_iterations + 1;
    }
  };
  std::mt19937_64 rng(6);
  std::vector<int> ia;
  std::vector<int> ib;
  for (int j = 0; j < 10; ++j) {
    const auto f = testing::random_compatible_load(static_cast<std::size_t>(a.stiffness.rows()), rng);
    ia.push_back(iterations(a, f));
    ib.push_back(iterations(b, f));
  }
  std::sort(ia.begin(), ia.end());
  std::sort(ib.begin(), ib.end());
  const double ma = 0.5 * (ia[4] + ia[5]);
  const double mb = 0.5 * (ib[4] + ib[5]);
  return {closest <= 0.01 * h && ma <= mb,
          fmt::format("closest vertex {:.3f} mm from a level set (h {} mm); median BiCGstab iterations {} with ghost "
                      "penalty 0.1, {} without (cap {})",
                      closest, h, ma, mb, opt.max_iterations)};
}

Outcome venant_moments() {
  const auto s = Setup::covering(testing::shifted_sphere_model(), 8.0);
  std::mt19937_64 rng(71);
  double zeroth = 0.0;
  double first = 0.0;
  for (int k = 0; k < 100; ++k) {
    Dipole d = random_brain_dipole(s, rng);
    d.moment *= 10.0;
    const auto q = venant_monopoles(d, s.partition, s.model, 0);
    double total = 0.0;
    double l1 = 0.0;
    Vec3 m = Vec3::Zero();
    for (const auto& p : q) {
      total += p.charge;
      l1 += std::abs(p.charge);
      m += p.charge * (p.position - d.position);
    }
    zeroth = std::max(zeroth, std::abs(total) / l1);
    first = std::max(first, (m - d.moment).norm() / d.moment.norm());
  }
  return {zeroth <= 1e-12 && first <= 1e-8,
          fmt::format("100 dipoles, h 8 mm: max |sum q|/|q|_1 {:.2e}, max first-moment error {:.2e}", zeroth, first)};
}

Outcome metric_identities() {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    std::vector<double> u(200);
    for (double& x : u) x = g(rng);
    std::vector<double> neg(u.size()), scaled(u.size()), twice(u.size()), half(u.size());
    const double alpha = std::exp(g(rng));
    for (std::size_t i = 0; i < u.size(); ++i) {
      neg[i] = -u[i];
      scaled[i] = alpha * u[i];
      twice[i] = 2.0 * u[i];
      half[i] = 0.5 * u[i];
    }
    worst = std::max({worst, std::abs(rdm(u, u)), std::abs(rdm(u, neg) - 100.0), std::abs(rdm(u, scaled)),
                      std::abs(mag(u, twice) - 100.0), std::abs(mag(u, half) + 50.0)});
  }
  return {worst <= 1e-12, fmt::format("20 random vectors: largest deviation {:.2e}", worst)};
}

Outcome analytic_oracle() {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r = 90.0;
  const double sigma = 0.33;
  const SphereModel m{{r}, {sigma}, Vec3::Zero(), 400};
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    const Vec3 pos = 0.9 * r * std::cbrt(u(rng)) * random_unit(rng);
    const Dipole d{pos, random_unit(rng)};
    std::vector<Vec3> el;
    for (int e = 0; e < 32; ++e) el.push_back(r * random_unit(rng));
    const auto series = sphere_forward(m, d, el);
    std::vector<double> closed;
    for (const auto& x : el) closed.push_back(testing::homogeneous_sphere_potential(r, sigma, pos, d.moment, x));
    closed = rereference(closed);
    double diff = 0.0;
    for (std::size_t i = 0; i < el.size(); ++i) diff = std::max(diff, std::abs(series[i] - closed[i]));
    worst = std::max(worst, diff / max_abs(closed));
  }
  return {worst <= 1e-8, fmt::format("50 configurations: max relative difference {:.2e}", worst)};
}

Outcome dipole_scan_recovery() {
  const SphereModel m{{92.0, 86.0, 80.0}, {0.43, 0.01, 0.33}, Vec3::Zero(), 200};
  const auto el = fibonacci_sphere(200, m.center, 92.0);
  const double spacing = 4.0;
  std::vector<Vec3> grid;
  for (int i = -19; i <= 19; ++i) {
    for (int j = -19; j <= 19; ++j) {
      for (int k = -19; k <= 19; ++k) {
        const Vec3 p = spacing * Vec3(i, j, k);
        if (p.norm() <= 76.0) grid.push_back(p);
      }
    }
  }
  LeadField lf(static_cast<int>(el.size()), static_cast<int>(grid.size()));
  lf.positions = grid;
#pragma omp parallel for schedule(dynamic, 64)
  for (int s = 0; s < lf.sources; ++s) {
    for (int d = 0; d < 3; ++d) {
      lf.set_column(3 * s + d, sphere_forward(m, {grid[static_cast<std::size_t>(s)], Vec3::Unit(d)}, el));
    }
  }
  std::mt19937_64 rng(44);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double far = 0.0;
  double gof = 100.0;
  for (int t = 0; t < 10; ++t) {
    const Vec3 truth = 64.0 * std::cbrt(u(rng)) * random_unit(rng);
    const auto r = dipole_scan(lf, sphere_forward(m, {truth, random_unit(rng)}, el));
    far = std::max(far, (grid[static_cast<std::size_t>(r.source)] - truth).norm());
    gof = std::min(gof, r.gof);
  }
  return {far <= spacing && gof >= 99.0,
          fmt::format("{} grid points, 10 off-grid dipoles: max distance {:.2f} mm, min GOF {:.3f} %", grid.size(),
                      far, gof)};
}

Outcome geometry_oracle() {
  const double h = 4.0;
  const double r = 78.0;
  const CompartmentModel model({{"brain", LevelSetField::sphere(Vec3(129, 127, 127), r), isotropic(0.33)}});
  const auto mesh = BackgroundMesh::covering(model.bounding_box(), h);
  const double total = 4.0 / 3.0 * M_PI * r * r * r;
  std::vector<double> errors;
  double oracle = 0.0;
  for (int level : {1, 2}) {
    CutOptions opt;
    opt.refinement = level;
    const auto part = build_partition(mesh, model, opt);
    double numeric = 0.0;
    for (const auto& cc : part.cut_cells()) numeric += cc.volume[0];
    if (level == 1) {
      // Uniform samples over the union of cut cells.
      std::mt19937_64 rng(12345);
      std::uniform_int_distribution<std::size_t> pick(0, part.cut_cells().size() - 1);
      std::uniform_real_distribution<double> u(0.0, h);
      const long samples = 10'000'000;
      long hits = 0;
      for (long n = 0; n < samples; ++n) {
        const Vec3 o = mesh.cell_origin(part.cut_cells()[pick(rng)].cell);
        if (model.label(o + Vec3(u(rng), u(rng), u(rng))) == 0) ++hits;
      }
      oracle = static_cast<double>(part.cut_cells().size()) * h * h * h * static_cast<double>(hits) /
               static_cast<double>(samples);
    }
    errors.push_back(std::abs(numeric - oracle) / total * 100.0);
  }
  return {errors[0] <= 1.0 && errors[1] <= 0.3,
          fmt::format("sphere r {} mm, h {} mm, 1e7 samples over the cut cells: cut-cell volume error {:.4f} % (one "
                      "level), {:.4f} % (two levels) of the sphere volume",
                      r, h, errors[0], errors[1])};
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::warn);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"sphere validation accuracy", sphere_validation},
      {"refinement convergence", refinement_convergence},
      {"transfer-matrix equivalence", transfer_equivalence},
      {"patch test", patch_test},
      {"matrix structure", matrix_structure},
      {"ghost-penalty stabilization", ghost_stabilization},
      {"Venant moments", venant_moments},
      {"metric identities", metric_identities},
      {"analytic oracle", analytic_oracle},
      {"dipole-scan recovery", dipole_scan_recovery},
      {"geometry oracle", geometry_oracle},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::stoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.contains(n)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, fmt::format("exception: {}", e.what())};
    }
    if (!o.pass) ++failed;
    fmt::print("{} {:2d} {}: {} [{:.1f} s]\n", o.pass ? "PASS" : "FAIL", n, criteria[i].first, o.detail,
               seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
