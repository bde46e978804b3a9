#include "cutfem/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "cutfem/error.hpp"
#include "cutfem/level_set.hpp"

namespace cutfem {

namespace {

namespace pt = boost::property_tree;

constexpr std::string_view kCompartmentPrefix = "compartment ";

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::vector<double> numbers(const std::string& section, const std::string& key, const std::string& text) {
  std::istringstream ss(text);
  std::vector<double> v;
  double x = 0;
  while (ss >> x) v.push_back(x);
  if (!ss.eof()) throw ConfigError(fmt::format("[{}] {}: '{}' is not a list of numbers", section, key, text));
  return v;
}

class Section {
 public:
  Section(std::string name, const pt::ptree& tree) : name_(std::move(name)), tree_(tree) {}

  ~Section() = default;
  Section(const Section&) = delete;
  Section& operator=(const Section&) = delete;

  bool has(const std::string& key) {
    used_.insert(key);
    return tree_.find(key) != tree_.not_found();
  }

  std::string text(const std::string& key) {
    used_.insert(key);
    const auto it = tree_.find(key);
    if (it == tree_.not_found()) throw ConfigError(fmt::format("[{}] is missing '{}'", name_, key));
    return it->second.data();
  }

  double number(const std::string& key) {
    const auto v = numbers(name_, key, text(key));
    if (v.size() != 1) throw ConfigError(fmt::format("[{}] {} needs one number", name_, key));
    return v[0];
  }

  int integer(const std::string& key) {
    const double v = number(key);
    if (v != std::floor(v)) throw ConfigError(fmt::format("[{}] {} must be an integer", name_, key));
    return static_cast<int>(v);
  }

  Vec3 vec3(const std::string& key) {
    const auto v = numbers(name_, key, text(key));
    if (v.size() != 3) throw ConfigError(fmt::format("[{}] {} needs three numbers", name_, key));
    return {v[0], v[1], v[2]};
  }

  bool flag(const std::string& key) {
    const auto v = lower(text(key));
    if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
    if (v == "false" || v == "no" || v == "0" || v == "off") return false;
    throw ConfigError(fmt::format("[{}] {}: '{}' is not a boolean", name_, key, v));
  }

  void number_if(const std::string& key, double& out) {
    if (has(key)) out = number(key);
  }
  void integer_if(const std::string& key, int& out) {
    if (has(key)) out = integer(key);
  }

  void check_unknown() const {
    for (const auto& [key, value] : tree_) {
      if (!used_.contains(key)) throw ConfigError(fmt::format("[{}] has unknown key '{}'", name_, key));
    }
  }

  const std::string& name() const { return name_; }

 private:
  std::string name_;
  const pt::ptree& tree_;
  std::set<std::string> used_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) path = base / path;
  return path.lexically_normal();
}

Mat3 parse_sigma(const std::string& section, const std::string& text) {
  const auto v = numbers(section, "sigma", text);
  Mat3 s;
  switch (v.size()) {
    case 1:
      return isotropic(v[0]);
    case 3:
      return Vec3(v[0], v[1], v[2]).asDiagonal();
    case 6:
      // xx yy zz xy xz yz
      s << v[0], v[3], v[4], v[3], v[1], v[5], v[4], v[5], v[2];
      return s;
    case 9:
      s << v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8];
      return s;
    default:
      throw ConfigError(fmt::format("[{}] sigma needs 1, 3, 6 or 9 numbers", section));
  }
}

std::string g17(double x) { return fmt::format("{:.17g}", x); }
std::string g17(const Vec3& v) { return fmt::format("{:.17g} {:.17g} {:.17g}", v.x(), v.y(), v.z()); }

std::string format_sigma(const Mat3& s) {
  if (s == isotropic(s(0, 0))) return g17(s(0, 0));
  if (s == s.transpose()) {
    return fmt::format("{} {} {} {} {} {}", g17(s(0, 0)), g17(s(1, 1)), g17(s(2, 2)), g17(s(0, 1)), g17(s(0, 2)),
                       g17(s(1, 2)));
  }
  std::string out;
  for (int i = 0; i < 9; ++i) out += (i ? " " : "") + g17(s(i / 3, i % 3));
  return out;
}

void write_ini(std::ostringstream& out, const RunConfig& c, bool with_runtime) {
  out << "[mesh]\n";
  out << "h = " << g17(c.mesh.h) << "\n";
  if (c.mesh.origin) out << "origin = " << g17(*c.mesh.origin) << "\n";
  if (c.mesh.dims) out << fmt::format("dims = {} {} {}\n", (*c.mesh.dims)[0], (*c.mesh.dims)[1], (*c.mesh.dims)[2]);
  out << "padding = " << c.mesh.padding << "\n";
  out << "refinement = " << c.mesh.refinement << "\n";

  for (const auto& comp : c.compartments) {
    out << "\n[compartment " << comp.name << "]\n";
    switch (comp.shape) {
      case ShapeKind::kSphere:
        out << "shape = sphere\ncenter = " << g17(comp.center) << "\nradius = " << g17(comp.radius) << "\n";
        break;
      case ShapeKind::kPlane:
        out << "shape = plane\nnormal = " << g17(comp.normal) << "\noffset = " << g17(comp.offset) << "\n";
        break;
      case ShapeKind::kGrid:
        out << "shape = grid\nfile = " << comp.grid.string() << "\n";
        if (comp.probability_threshold) out << "probability_threshold = " << g17(*comp.probability_threshold) << "\n";
        break;
    }
    out << "sigma = " << format_sigma(comp.sigma) << "\n";
  }

  out << "\n[fem]\n";
  out << "variant = " << to_string(c.fem.variant) << "\n";
  out << "gamma = " << g17(c.fem.gamma) << "\n";
  out << "ghost_gamma = " << g17(c.fem.ghost_gamma) << "\n";
  out << "volume_order = " << c.fem.volume_order << "\n";
  out << "facet_order = " << c.fem.facet_order << "\n";

  out << "\n[solver]\n";
  out << "tolerance = " << g17(c.solver.tolerance) << "\n";
  out << "max_iterations = " << c.solver.max_iterations << "\n";
  out << "preconditioner = " << to_string(c.solver.preconditioner) << "\n";
  out << "block_size = " << c.solver.block_size << "\n";

  out << "\n[electrodes]\n";
  if (!c.electrodes.file.empty()) out << "file = " << c.electrodes.file.string() << "\n";
  if (c.electrodes.fibonacci > 0) out << "fibonacci = " << c.electrodes.fibonacci << "\n";
  out << "max_snap = " << g17(c.electrodes.max_snap) << "\n";
  out << "reference = " << c.electrodes.reference << "\n";

  out << "\n[sources]\n";
  if (!c.sources.file.empty()) out << "file = " << c.sources.file.string() << "\n";
  if (c.sources.spacing > 0.0) out << "spacing = " << g17(c.sources.spacing) << "\n";
  if (c.sources.anchor) out << "anchor = " << g17(*c.sources.anchor) << "\n";
  if (!c.sources.compartment.empty()) out << "compartment = " << c.sources.compartment << "\n";
  out << "order = " << c.sources.order << "\n";
  out << "lambda = " << g17(c.sources.lambda) << "\n";
  out << "quadrature_order = " << c.sources.quadrature_order << "\n";
  out << "neighborhood = " << to_string(c.sources.neighborhood) << "\n";

  out << "\n[analytic]\n";
  out << "terms = " << c.analytic_terms << "\n";

  if (with_runtime) {
    out << "\n[output]\n";
    out << "directory = " << c.output.directory.string() << "\n";
    out << "csv = " << (c.output.csv ? "true" : "false") << "\n";
    out << "\n[run]\n";
    out << "threads = " << c.threads << "\n";
  }
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(fmt::format("config line {}: {}", e.line(), e.message()));
  }

  RunConfig c;
  static const std::set<std::string> known{"mesh", "fem", "solver", "electrodes", "sources", "analytic", "output", "run"};
  for (const auto& [name, body] : tree) {
    if (!body.data().empty()) throw ConfigError(fmt::format("config key '{}' outside of a section", name));
    if (name.starts_with(kCompartmentPrefix)) {
      Section s(name, body);
      CompartmentConfig comp;
      comp.name = name.substr(kCompartmentPrefix.size());
      if (comp.name.empty()) throw ConfigError("compartment section without a name");
      const auto shape = lower(s.text("shape"));
      if (shape == "sphere") {
        comp.shape = ShapeKind::kSphere;
        comp.center = s.vec3("center");
        comp.radius = s.number("radius");
      } else if (shape == "plane") {
        comp.shape = ShapeKind::kPlane;
        comp.normal = s.vec3("normal");
        comp.offset = s.number("offset");
      } else if (shape == "grid") {
        comp.shape = ShapeKind::kGrid;
        comp.grid = resolve(base_dir, s.text("file"));
        if (s.has("probability_threshold")) comp.probability_threshold = s.number("probability_threshold");
      } else {
        throw ConfigError(fmt::format("[{}] unknown shape '{}' (sphere, plane or grid)", name, shape));
      }
      comp.sigma = parse_sigma(name, s.text("sigma"));
      s.check_unknown();
      c.compartments.push_back(std::move(comp));
    } else if (!known.contains(name)) {
      throw ConfigError(fmt::format("unknown config section [{}]", name));
    }
  }

  const pt::ptree empty;
  const auto section = [&](const char* name) -> const pt::ptree& {
    const auto it = tree.find(name);
    return it == tree.not_found() ? empty : it->second;
  };

  {
    Section s("mesh", section("mesh"));
    s.number_if("h", c.mesh.h);
    if (s.has("origin")) c.mesh.origin = s.vec3("origin");
    if (s.has("dims")) {
      const Vec3 d = s.vec3("dims");
      c.mesh.dims = std::array<int, 3>{static_cast<int>(d.x()), static_cast<int>(d.y()), static_cast<int>(d.z())};
    }
    s.integer_if("padding", c.mesh.padding);
    s.integer_if("refinement", c.mesh.refinement);
    s.check_unknown();
  }
  {
    Section s("fem", section("fem"));
    if (s.has("variant")) c.fem.variant = parse_nitsche_variant(s.text("variant"));
    s.number_if("gamma", c.fem.gamma);
    s.number_if("ghost_gamma", c.fem.ghost_gamma);
    s.integer_if("volume_order", c.fem.volume_order);
    s.integer_if("facet_order", c.fem.facet_order);
    s.check_unknown();
  }
  {
    Section s("solver", section("solver"));
    s.number_if("tolerance", c.solver.tolerance);
    s.integer_if("max_iterations", c.solver.max_iterations);
    if (s.has("preconditioner")) c.solver.preconditioner = parse_preconditioner(s.text("preconditioner"));
    s.integer_if("block_size", c.solver.block_size);
    s.check_unknown();
  }
  {
    Section s("electrodes", section("electrodes"));
    if (s.has("file")) c.electrodes.file = resolve(base_dir, s.text("file"));
    s.integer_if("fibonacci", c.electrodes.fibonacci);
    s.number_if("max_snap", c.electrodes.max_snap);
    s.integer_if("reference", c.electrodes.reference);
    s.check_unknown();
  }
  {
    Section s("sources", section("sources"));
    if (s.has("file")) c.sources.file = resolve(base_dir, s.text("file"));
    s.number_if("spacing", c.sources.spacing);
    if (s.has("anchor")) c.sources.anchor = s.vec3("anchor");
    if (s.has("compartment")) c.sources.compartment = s.text("compartment");
    s.integer_if("order", c.sources.order);
    s.number_if("lambda", c.sources.lambda);
    s.integer_if("quadrature_order", c.sources.quadrature_order);
    if (s.has("neighborhood")) c.sources.neighborhood = parse_venant_neighborhood(s.text("neighborhood"));
    s.check_unknown();
  }
  {
    Section s("analytic", section("analytic"));
    s.integer_if("terms", c.analytic_terms);
    s.check_unknown();
  }
  {
    Section s("output", section("output"));
    if (s.has("directory")) c.output.directory = resolve(base_dir, s.text("directory"));
    if (s.has("csv")) c.output.csv = s.flag("csv");
    s.check_unknown();
  }
  {
    Section s("run", section("run"));
    s.integer_if("threads", c.threads);
    s.check_unknown();
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open config {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

std::string to_ini(const RunConfig& config) {
  std::ostringstream out;
  write_ini(out, config, true);
  return out.str();
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char ch : bytes) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const RunConfig& config) {
  std::ostringstream out;
  write_ini(out, config, false);
  return fmt::format("{:016x}", fnv1a(out.str()));
}

void RunConfig::validate() const {
  if (!(mesh.h > 0.0)) throw ConfigError("[mesh] h must be positive");
  if (mesh.origin.has_value() != mesh.dims.has_value()) {
    throw ConfigError("[mesh] origin and dims must be given together");
  }
  if (mesh.dims && ((*mesh.dims)[0] < 1 || (*mesh.dims)[1] < 1 || (*mesh.dims)[2] < 1)) {
    throw ConfigError("[mesh] dims must be positive");
  }
  if (mesh.padding < 0) throw ConfigError("[mesh] padding must be non-negative");
  if (mesh.refinement < 0 || mesh.refinement > 3) throw ConfigError("[mesh] refinement must be 0..3");
  if (compartments.empty()) throw ConfigError("config has no [compartment NAME] sections");
  std::set<std::string> names;
  for (const auto& c : compartments) {
    if (!names.insert(c.name).second) throw ConfigError(fmt::format("compartment '{}' appears twice", c.name));
    if (c.shape == ShapeKind::kSphere && !(c.radius > 0.0)) {
      throw ConfigError(fmt::format("compartment '{}' needs a positive radius", c.name));
    }
    if (c.shape == ShapeKind::kPlane && !(c.normal.norm() > 0.0)) {
      throw ConfigError(fmt::format("compartment '{}' needs a non-zero normal", c.name));
    }
    if (c.shape == ShapeKind::kGrid && !std::filesystem::exists(c.grid)) {
      throw ConfigError(fmt::format("compartment '{}': level-set file {} does not exist", c.name, c.grid.string()));
    }
    const Eigen::SelfAdjointEigenSolver<Mat3> eig(0.5 * (c.sigma + c.sigma.transpose()));
    if (!(eig.eigenvalues().minCoeff() > 0.0)) {
      throw ConfigError(fmt::format("compartment '{}' needs a positive definite conductivity", c.name));
    }
  }
  if (!(fem.gamma > 0.0)) throw ConfigError("[fem] gamma must be positive");
  if (fem.ghost_gamma < 0.0) throw ConfigError("[fem] ghost_gamma must be non-negative");
  if (!(solver.tolerance > 0.0)) throw ConfigError("[solver] tolerance must be positive");
  if (solver.max_iterations < 1) throw ConfigError("[solver] max_iterations must be positive");
  if (solver.block_size < 1) throw ConfigError("[solver] block_size must be positive");
  if (electrodes.file.empty() == (electrodes.fibonacci <= 0)) {
    throw ConfigError("[electrodes] needs exactly one of file and fibonacci");
  }
  if (!electrodes.file.empty() && !std::filesystem::exists(electrodes.file)) {
    throw ConfigError(fmt::format("[electrodes] file {} does not exist", electrodes.file.string()));
  }
  if (electrodes.fibonacci > 0 && compartments.back().shape != ShapeKind::kSphere) {
    throw ConfigError("[electrodes] fibonacci needs a spherical outermost compartment");
  }
  if (electrodes.reference < 0) throw ConfigError("[electrodes] reference must be non-negative");
  if (sources.file.empty() == !(sources.spacing > 0.0)) {
    throw ConfigError("[sources] needs exactly one of file and spacing");
  }
  if (!sources.file.empty() && !std::filesystem::exists(sources.file)) {
    throw ConfigError(fmt::format("[sources] file {} does not exist", sources.file.string()));
  }
  source_compartment();
  if (sources.order < 1) throw ConfigError("[sources] order must be at least 1");
  if (sources.lambda < 0.0) throw ConfigError("[sources] lambda must be non-negative");
  if (sources.quadrature_order < 1) throw ConfigError("[sources] quadrature_order must be at least 1");
  if (analytic_terms < 1) throw ConfigError("[analytic] terms must be positive");
  if (threads < 0) throw ConfigError("[run] threads must be non-negative");
}

int RunConfig::source_compartment() const {
  if (sources.compartment.empty()) return 0;
  for (std::size_t i = 0; i < compartments.size(); ++i) {
    if (compartments[i].name == sources.compartment) return static_cast<int>(i);
  }
  throw ConfigError(fmt::format("[sources] compartment '{}' does not exist", sources.compartment));
}

CompartmentModel RunConfig::build_model() const {
  std::vector<Compartment> out;
  for (const auto& c : compartments) {
    Compartment comp{c.name, {}, c.sigma};
    switch (c.shape) {
      case ShapeKind::kSphere:
        comp.level_set = LevelSetField::sphere(c.center, c.radius);
        break;
      case ShapeKind::kPlane:
        comp.level_set = LevelSetField::half_space(c.normal.normalized(), c.offset);
        break;
      case ShapeKind::kGrid: {
        auto grid = read_lsgrid(c.grid);
        if (c.probability_threshold) grid = level_set_from_probability(std::move(grid), *c.probability_threshold);
        comp.level_set = LevelSetField(std::move(grid));
        break;
      }
    }
    out.push_back(std::move(comp));
  }
  return CompartmentModel(std::move(out));
}

CutOptions RunConfig::cut_options() const {
  CutOptions o;
  o.refinement = mesh.refinement;
  return o;
}

AssemblyOptions RunConfig::assembly_options() const {
  AssemblyOptions o;
  o.variant = fem.variant;
  o.gamma = fem.gamma;
  o.ghost_gamma = fem.ghost_gamma;
  o.volume_order = fem.volume_order;
  o.facet_order = fem.facet_order;
  return o;
}

SolverOptions RunConfig::solver_options() const {
  SolverOptions o;
  o.tolerance = solver.tolerance;
  o.max_iterations = solver.max_iterations;
  o.preconditioner = solver.preconditioner;
  o.block_size = solver.block_size;
  return o;
}

VenantConfig RunConfig::venant() const {
  VenantConfig v;
  v.order = sources.order;
  v.lambda = sources.lambda;
  v.quadrature_order = sources.quadrature_order;
  v.neighborhood = sources.neighborhood;
  return v;
}

}  // namespace cutfem
