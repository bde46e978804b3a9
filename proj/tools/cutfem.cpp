#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/os.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "cutfem/config.hpp"
#include "cutfem/electrodes.hpp"
#include "cutfem/error.hpp"
#include "cutfem/metrics.hpp"
#include "cutfem/pipeline.hpp"

namespace {

using namespace cutfem;

constexpr int kFailed = 1;
constexpr int kNotMonotone = 3;

struct Overrides {
  std::string output;
  int threads = -1;
  bool csv = false;
  double h = 0.0;
};

RunConfig load(const std::string& path, const Overrides& o) {
  RunConfig c = load_config(path);
  if (!o.output.empty()) c.output.directory = o.output;
  if (o.threads >= 0) c.threads = o.threads;
  if (o.csv) c.output.csv = true;
  if (o.h > 0.0) {
    c.mesh.h = o.h;
    c.mesh.origin.reset();
    c.mesh.dims.reset();
  }
  return c;
}

void print_report(const ForwardReport& r) {
  fmt::print("config {}\n", r.config_hash);
  fmt::print("h {} mm, {} cells, {} cut cells, {} snippets, {} DOFs\n", r.h, r.cells, r.cut_cells, r.snippets, r.dofs);
  fmt::print("{} electrodes (max snap {:.3g} mm), {} sources\n", r.electrodes, r.max_snap, r.sources);
  fmt::print("solver iterations min/median/max {}/{}/{}\n", r.min_iterations, r.median_iterations, r.max_iterations);
  for (const auto& t : r.timings) fmt::print("  {:<16} {:10.3f} s\n", t.stage, t.seconds);
}

int cmd_forward(const std::string& path, const Overrides& o) {
  const RunConfig c = load(path, o);
  const auto result = run_forward(c);
  write_forward(c, result);
  print_report(result.report);
  fmt::print("lead field {} x {} written to {}\n", result.leadfield.electrodes, result.leadfield.columns(),
             (c.output.directory / "leadfield.bin").string());
  return 0;
}

int cmd_validate(const std::string& path, const Overrides& o, bool self_test) {
  const RunConfig c = load(path, o);
  const auto v = run_validate(c, self_test);
  write_validation(c, v);
  print_report(v.report);
  fmt::print("{:>6} {:>6} {:>6} {:>12} {:>12} {:>12} {:>12}\n", "ecc_lo", "ecc_hi", "count", "median_rdm",
             "max_rdm", "median_mag", "max_|mag|");
  for (const auto& b : v.bins) {
    fmt::print("{:6.2f} {:6.2f} {:6d} {:12.4f} {:12.4f} {:12.4f} {:12.4f}{}\n", b.lo, b.hi, b.count, b.median_rdm,
               b.max_rdm, b.median_mag, b.max_abs_mag, b.flagged ? "  *" : "");
  }
  fmt::print("overall: median RDM {:.4f} %, median |MAG| {:.4f} % over {} records\n", v.median_rdm,
             v.median_abs_mag, v.records.size());
  if (v.top_band_median_rdm) fmt::print("eccentricity 0.96-0.98: median RDM {:.4f} %\n", *v.top_band_median_rdm);
  return 0;
}

int cmd_convergence(const std::string& path, const Overrides& o, const std::vector<double>& h) {
  const RunConfig c = load(path, o);
  const auto r = run_convergence(c, h);
  write_convergence(c, r);
  fmt::print("{:>8} {:>10} {:>6} {:>12} {:>14}\n", "h_mm", "dofs", "count", "median_rdm", "median_|mag|");
  for (const auto& row : r.rows) {
    fmt::print("{:8.3g} {:10d} {:6d} {:12.4f} {:14.4f}\n", row.h, row.dofs, row.band_count, row.band_median_rdm,
               row.band_median_abs_mag);
  }
  if (!r.monotone) {
    fmt::print(stderr, "convergence: median RDM in eccentricity band [{}, {}] does not decrease monotonically\n",
               r.band_lo, r.band_hi);
    return kNotMonotone;
  }
  fmt::print("median RDM decreases monotonically\n");
  return 0;
}

int cmd_scan(const std::string& lf_path, const std::string& data_path, const std::string& positions,
             const std::string& out_path) {
  std::string tag;
  LeadField lf;
  std::vector<double> data;
  try {
    lf = read_leadfield(lf_path, &tag);
    data = rereference(read_vector(data_path));
  } catch (const std::exception& e) {
    throw StageError("scan input", e.what());
  }
  if (!positions.empty()) lf.positions = read_positions(positions);
  ScanResult r;
  try {
    r = dipole_scan(lf, data);
  } catch (const std::exception& e) {
    throw StageError("scan", e.what());
  }
  std::string where;
  if (static_cast<std::size_t>(r.source) < lf.positions.size()) {
    const Vec3& p = lf.positions[static_cast<std::size_t>(r.source)];
    where = fmt::format(" at ({:.6g}, {:.6g}, {:.6g})", p.x(), p.y(), p.z());
  }
  const std::string line = fmt::format("best source {}{}: GOF {:.6f} %, moment ({:.6g}, {:.6g}, {:.6g})\n", r.source,
                                       where, r.gof, r.moment.x(), r.moment.y(), r.moment.z());
  fmt::print("{}", line);
  if (!out_path.empty()) {
    auto f = fmt::output_file(out_path);
    f.print("# {}\n{}", tag.empty() ? "config unknown" : tag, line);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unfitted discontinuous Galerkin EEG forward solver"};
  app.require_subcommand(1);
  bool verbose = false;
  bool quiet = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Warnings and errors only");

  Overrides o;
  std::string config;
  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("config", config, "INI configuration")->required()->check(CLI::ExistingFile);
    cmd->add_option("-o,--output", o.output, "Output directory (overrides [output] directory)");
    cmd->add_option("-t,--threads", o.threads, "OpenMP threads, 0 for the default")->check(CLI::NonNegativeNumber);
  };

  auto* forward = app.add_subcommand("forward", "Compute the lead field");
  add_common(forward);
  forward->add_flag("--csv", o.csv, "Also write leadfield.csv");
  forward->add_option("--mesh-size", o.h, "Mesh size h in mm (overrides [mesh])");

  bool self_test = false;
  auto* validate = app.add_subcommand("validate", "Compare against the concentric-sphere series");
  add_common(validate);
  validate->add_flag("--self-test", self_test, "Compare the analytic potentials with themselves");
  validate->add_option("--mesh-size", o.h, "Mesh size h in mm (overrides [mesh])");

  std::vector<double> h_list;
  auto* convergence = app.add_subcommand("convergence", "Validation errors against mesh size");
  add_common(convergence);
  convergence->add_option("--sizes", h_list, "Mesh sizes h in mm, coarse to fine")->required();

  std::string lf_path;
  std::string data_path;
  std::string positions;
  std::string scan_out;
  auto* scan = app.add_subcommand("scan", "Single dipole scan over a lead field");
  scan->add_option("leadfield", lf_path, "Lead-field file")->required()->check(CLI::ExistingFile);
  scan->add_option("data", data_path, "Electrode potentials, one per electrode")->required()->check(CLI::ExistingFile);
  scan->add_option("--positions", positions, "Source positions (sources.txt from forward)")->check(CLI::ExistingFile);
  scan->add_option("-o,--output", scan_out, "Write the result to this file");

  auto* show = app.add_subcommand("config", "Print the canonical configuration and its hash");
  show->add_option("config", config, "INI configuration")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);
  spdlog::set_default_logger(spdlog::stderr_color_mt("cutfem"));
  spdlog::set_level(verbose ? spdlog::level::debug : quiet ? spdlog::level::warn : spdlog::level::info);

  try {
    if (forward->parsed()) return cmd_forward(config, o);
    if (validate->parsed()) return cmd_validate(config, o, self_test);
    if (convergence->parsed()) return cmd_convergence(config, o, h_list);
    if (scan->parsed()) return cmd_scan(lf_path, data_path, positions, scan_out);
    if (show->parsed()) {
      const auto c = load_config(config);
      fmt::print("# config {}\n{}", config_hash(c), to_ini(c));
      return 0;
    }
  } catch (const StageError& e) {
    fmt::print(stderr, "error [{}]: {}\n", e.stage(), e.what());
    return kFailed;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error [config]: {}\n", e.what());
    return kFailed;
  }
  return kFailed;
}
