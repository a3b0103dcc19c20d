#include "swopt/config.hpp"

#include "swopt/expression.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>

namespace swopt {

namespace {

const std::map<std::string, Scenario> kScenarios{{"forward", Scenario::Forward},
                                                 {"adjoint", Scenario::Adjoint},
                                                 {"optimize", Scenario::Optimize},
                                                 {"wellbalance-check", Scenario::WellbalanceCheck},
                                                 {"smoothing-study", Scenario::SmoothingStudy},
                                                 {"gradient-check", Scenario::GradientCheck}};

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

[[noreturn]] void bad(const std::string& key, const std::string& what) {
  throw ConfigError("config error: " + key + ": " + what);
}

double to_double(const std::string& key, const std::string& s) {
  if (s == "nan" || s == "auto") return std::numeric_limits<double>::quiet_NaN();
  double v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) bad(key, "expected a number, got \"" + s + "\"");
  return v;
}

long to_long(const std::string& key, const std::string& s) {
  long v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) bad(key, "expected an integer, got \"" + s + "\"");
  return v;
}

std::string unquote(std::string s) {
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) s = s.substr(1, s.size() - 2);
  return s;
}

// one configurable parameter: "section.key" plus parse and print
struct Binding {
  std::string key;
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

std::vector<Binding> bindings(RunConfig& c) {
  std::vector<Binding> b;
  auto num = [&](const char* k, double& v) {
    b.push_back({k, [&v, k](const std::string& s) { v = to_double(k, s); }, [&v] { return fmt(v); }});
  };
  auto integer = [&](const char* k, int& v) {
    b.push_back({k, [&v, k](const std::string& s) { v = static_cast<int>(to_long(k, s)); },
                 [&v] { return std::to_string(v); }});
  };
  auto text = [&](const char* k, std::string& v) {
    b.push_back({k, [&v](const std::string& s) { v = unquote(s); }, [&v] { return v; }});
  };
  auto flag = [&](const char* k, bool& v) {
    b.push_back({k,
                 [&v, k](const std::string& s) {
                   if (s == "true" || s == "1" || s == "on") v = true;
                   else if (s == "false" || s == "0" || s == "off") v = false;
                   else bad(k, "expected true or false, got \"" + s + "\"");
                 },
                 [&v] { return std::string(v ? "true" : "false"); }});
  };
  auto list = [&](const char* k, std::vector<double>& v) {
    b.push_back({k,
                 [&v, k](const std::string& s) {
                   v.clear();
                   std::stringstream ss(s);
                   std::string item;
                   while (std::getline(ss, item, ',')) {
                     const auto a = item.find_first_not_of(" \t"), e = item.find_last_not_of(" \t");
                     if (a == std::string::npos) bad(k, "empty list entry");
                     v.push_back(to_double(k, item.substr(a, e - a + 1)));
                   }
                 },
                 [&v] {
                   std::string out;
                   for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + fmt(v[i]);
                   return out;
                 }});
  };

  b.push_back({"run.scenario", [&c](const std::string& s) { c.scenario = parse_scenario(s); },
               [&c] { return scenario_name(c.scenario); }});
  text("run.output_dir", c.output_dir);
  integer("run.threads", c.threads);

  text("mesh.file", c.mesh.file);
  text("mesh.kind", c.mesh.kind);
  num("mesh.radius", c.mesh.radius);
  num("mesh.center_x", c.mesh.center_x);
  num("mesh.obstacle_x", c.mesh.obstacle_x);
  num("mesh.obstacle_y", c.mesh.obstacle_y);
  num("mesh.obstacle_radius", c.mesh.obstacle_radius);
  num("mesh.h", c.mesh.h);
  integer("mesh.n_cells", c.mesh.n_cells);
  num("mesh.length", c.mesh.length);

  num("physics.g", c.physics.g);
  num("physics.phi_omega", c.physics.phi_omega);
  num("physics.phi_obstacle", c.physics.phi_obstacle);
  text("physics.porosity", c.physics.porosity);
  num("physics.mu_f", c.physics.mu_f);
  num("physics.H1", c.physics.H1);
  text("physics.open_sea_mode", c.physics.open_sea_mode);
  text("physics.sediment", c.physics.sediment);
  text("physics.surface", c.physics.surface);
  text("physics.uH", c.physics.uH);
  text("physics.vH", c.physics.vH);
  flag("physics.shock", c.physics.shock);
  num("physics.shock_s0", c.physics.shock_s0);
  num("physics.shock_kappa", c.physics.shock_kappa);
  num("physics.shock_mu_max", c.physics.shock_mu_max);

  integer("discretization.degree", c.discretization.degree);
  num("discretization.c_ip", c.discretization.c_ip);
  num("discretization.theta", c.discretization.theta);
  num("discretization.dt", c.discretization.dt);
  num("discretization.T", c.discretization.T);
  num("discretization.newton_tol", c.discretization.newton_tol);
  integer("discretization.newton_max_iter", c.discretization.newton_max_iter);

  num("objective.nu2", c.objective.nu2);
  num("objective.nu3", c.objective.nu3);
  num("objective.nu4", c.objective.nu4);
  num("objective.d_min", c.objective.d_min);
  num("objective.target_level", c.objective.target_level);
  num("objective.target_uH", c.objective.target_uH);
  num("objective.target_vH", c.objective.target_vH);
  num("objective.weight_H", c.objective.weight_H);
  num("objective.weight_uH", c.objective.weight_uH);
  num("objective.weight_vH", c.objective.weight_vH);
  num("objective.eikonal_viscosity", c.objective.eikonal_viscosity);

  num("optimizer.rho0", c.optimizer.rho0);
  num("optimizer.shrink", c.optimizer.shrink);
  integer("optimizer.max_iterations", c.optimizer.max_iterations);
  integer("optimizer.max_trials", c.optimizer.max_trials);
  num("optimizer.tol", c.optimizer.tol);
  num("optimizer.mu_min", c.optimizer.mu_min);
  num("optimizer.mu_max", c.optimizer.mu_max);
  num("optimizer.lambda", c.optimizer.lambda);

  list("smoothing.alphas", c.smoothing.alphas);
  integer("smoothing.n_cells", c.smoothing.n_cells);
  num("smoothing.length", c.smoothing.length);
  num("smoothing.x0", c.smoothing.x0);
  num("smoothing.x1", c.smoothing.x1);
  num("smoothing.phi2", c.smoothing.phi2);
  num("smoothing.T", c.smoothing.T);
  num("smoothing.dt", c.smoothing.dt);
  text("smoothing.height", c.smoothing.height);

  integer("gradient.directions", c.gradient.directions);
  b.push_back({"gradient.seed", [&c](const std::string& s) { c.gradient.seed = static_cast<unsigned>(to_long("gradient.seed", s)); },
               [&c] { return std::to_string(c.gradient.seed); }});
  list("gradient.epsilons", c.gradient.epsilons);

  num("wellbalance.level", c.wellbalance.level);
  num("wellbalance.tol", c.wellbalance.tol);

  integer("output.vtk_stride", c.output.vtk_stride);
  return b;
}

void check_expression(const std::string& key, const std::string& text) {
  try {
    Expression e(text);
  } catch (const ConfigError& err) {
    bad(key, err.what());
  }
}

void check_time_grid(const std::string& section, double T, double dt) {
  if (!(dt > 0)) bad(section + ".dt", "must be positive");
  if (!(T > 0)) bad(section + ".T", "must be positive");
  const double n = std::round(T / dt);
  if (n < 1 || std::abs(n * dt - T) > 1e-12) bad(section + ".dt", "must divide T");
}

}  // namespace

Scenario parse_scenario(const std::string& name) {
  const auto it = kScenarios.find(name);
  if (it == kScenarios.end()) bad("run.scenario", "unknown scenario \"" + name + "\"");
  return it->second;
}

std::string scenario_name(Scenario s) {
  for (const auto& [name, v] : kScenarios)
    if (v == s) return name;
  return "?";
}

void RunConfig::validate() const {
  if (!mesh.file.empty() && !std::filesystem::exists(mesh.file)) bad("mesh.file", "no such file " + mesh.file);
  if (mesh.kind != "half_circle" && mesh.kind != "interval") bad("mesh.kind", "expected half_circle or interval");
  if (!(mesh.radius > 0)) bad("mesh.radius", "must be positive");
  if (!(mesh.obstacle_radius > 0)) bad("mesh.obstacle_radius", "must be positive");
  if (!(mesh.h > 0)) bad("mesh.h", "must be positive");
  if (mesh.n_cells < 1) bad("mesh.n_cells", "must be at least 1");
  if (!(mesh.length > 0)) bad("mesh.length", "must be positive");

  if (!(physics.g > 0)) bad("physics.g", "must be positive");
  if (!(physics.phi_omega > 0 && physics.phi_omega <= 1)) bad("physics.phi_omega", "must lie in (0, 1]");
  if (!(physics.phi_obstacle > 0 && physics.phi_obstacle <= 1)) bad("physics.phi_obstacle", "must lie in (0, 1]");
  if (!(physics.mu_f >= 0)) bad("physics.mu_f", "must be nonnegative");
  if (!(physics.H1 > 0)) bad("physics.H1", "must be positive");
  if (physics.open_sea_mode != "surface" && physics.open_sea_mode != "depth")
    bad("physics.open_sea_mode", "expected surface or depth");
  if (!physics.porosity.empty()) check_expression("physics.porosity", physics.porosity);
  check_expression("physics.sediment", physics.sediment);
  check_expression("physics.surface", physics.surface);
  check_expression("physics.uH", physics.uH);
  check_expression("physics.vH", physics.vH);
  if (!(physics.shock_kappa > 0)) bad("physics.shock_kappa", "must be positive");
  if (!(physics.shock_mu_max >= 0)) bad("physics.shock_mu_max", "must be nonnegative");

  if (discretization.degree < 0 || discretization.degree > 4) bad("discretization.degree", "must lie in 0..4");
  if (!(discretization.c_ip > 0)) bad("discretization.c_ip", "must be positive");
  if (!(discretization.theta >= 0 && discretization.theta <= 1)) bad("discretization.theta", "must lie in [0, 1]");
  check_time_grid("discretization", discretization.T, discretization.dt);
  if (!(discretization.newton_tol > 0)) bad("discretization.newton_tol", "must be positive");
  if (discretization.newton_max_iter < 1) bad("discretization.newton_max_iter", "must be at least 1");

  if (!(objective.nu2 >= 0)) bad("objective.nu2", "must be nonnegative");
  if (!(objective.nu3 >= 0)) bad("objective.nu3", "must be nonnegative");
  if (!(objective.nu4 >= 0)) bad("objective.nu4", "must be nonnegative");
  if (!(objective.d_min > 0)) bad("objective.d_min", "must be positive");

  try {
    optimization().validate();
  } catch (const ConfigError& e) {
    bad("optimizer", e.what());
  }

  if (smoothing.alphas.empty()) bad("smoothing.alphas", "must not be empty");
  for (double a : smoothing.alphas)
    if (!(a > 0)) bad("smoothing.alphas", "entries must be positive");
  if (smoothing.n_cells < 1) bad("smoothing.n_cells", "must be at least 1");
  if (!(smoothing.length > 0)) bad("smoothing.length", "must be positive");
  if (!(smoothing.x0 < smoothing.x1)) bad("smoothing.x1", "must exceed smoothing.x0");
  if (!(smoothing.phi2 > 0 && smoothing.phi2 <= 1)) bad("smoothing.phi2", "must lie in (0, 1]");
  check_time_grid("smoothing", smoothing.T, smoothing.dt);
  check_expression("smoothing.height", smoothing.height);

  if (gradient.directions < 1) bad("gradient.directions", "must be at least 1");
  if (gradient.epsilons.empty()) bad("gradient.epsilons", "must not be empty");
  for (double e : gradient.epsilons)
    if (!(e > 0)) bad("gradient.epsilons", "entries must be positive");

  if (!(wellbalance.tol > 0)) bad("wellbalance.tol", "must be positive");
  if (output.vtk_stride < 0) bad("output.vtk_stride", "must be nonnegative");
  if (threads < 1) bad("run.threads", "must be at least 1");

  const bool shape = scenario == Scenario::Adjoint || scenario == Scenario::Optimize ||
                     scenario == Scenario::GradientCheck;
  if (shape && !physics.porosity.empty())
    bad("physics.porosity", "shape scenarios take porosity from the region tags");
  if (shape && (mesh.kind == "interval" && mesh.file.empty()))
    bad("mesh.kind", "shape scenarios need a 2D mesh");
}

SweParams RunConfig::swe_params() const {
  SweParams p;
  p.g = physics.g;
  p.mu_f = physics.mu_f;
  p.c_ip = discretization.c_ip;
  p.theta = discretization.theta;
  p.boundary.H1 = physics.H1;
  p.boundary.mode = physics.open_sea_mode == "depth" ? swe::OpenSeaMode::Depth : swe::OpenSeaMode::Surface;
  p.shock.enabled = physics.shock;
  p.shock.s0 = physics.shock_s0;
  p.shock.kappa = physics.shock_kappa;
  p.shock.mu_max = physics.shock_mu_max;
  p.newton.tol = discretization.newton_tol;
  p.newton.max_iter = discretization.newton_max_iter;
  return p;
}

ShapeSetup RunConfig::shape_setup() const {
  ShapeSetup s;
  s.degree = discretization.degree;
  s.swe = swe_params();
  s.phi_omega = physics.phi_omega;
  s.phi_obstacle = physics.phi_obstacle;
  const Expression z(physics.sediment), eta(physics.surface), qx(physics.uH), qy(physics.vH);
  s.sediment = [z](const Vec2& x) { return z(x); };
  s.initial_surface = [eta, qx, qy](const Vec2& x) { return Vec3(eta(x), qx(x), qy(x)); };
  s.T = discretization.T;
  s.dt = discretization.dt;
  s.weights.tracking.state = Vec3(objective.target_level, objective.target_uH, objective.target_vH);
  s.weights.tracking.weight = Vec3(objective.weight_H, objective.weight_uH, objective.weight_vH);
  s.weights.nu2 = objective.nu2;
  s.weights.nu3 = objective.nu3;
  s.weights.nu4 = objective.nu4;
  s.weights.d_min = objective.d_min;
  s.eikonal.viscosity = objective.eikonal_viscosity;
  return s;
}

OptimizationConfig RunConfig::optimization() const {
  OptimizationConfig o;
  o.setup = shape_setup();
  o.rho0 = optimizer.rho0;
  o.shrink = optimizer.shrink;
  o.max_iterations = optimizer.max_iterations;
  o.max_trials = optimizer.max_trials;
  o.tol = optimizer.tol;
  o.mu_min = optimizer.mu_min;
  o.mu_max = optimizer.mu_max;
  o.lambda = optimizer.lambda;
  return o;
}

SmoothingStudyConfig RunConfig::smoothing_study() const {
  SmoothingStudyConfig s;
  s.n_cells = smoothing.n_cells;
  s.length = smoothing.length;
  s.T = smoothing.T;
  s.dt = smoothing.dt;
  s.x0 = smoothing.x0;
  s.x1 = smoothing.x1;
  s.phi2 = smoothing.phi2;
  s.degree = discretization.degree;
  s.swe = swe_params();
  const Expression h(smoothing.height);
  s.initial_height = [h](double x) { return h(x, 0.0); };
  return s;
}

Mesh RunConfig::build_mesh() const {
  if (!mesh.file.empty()) return load_msh(mesh.file);
  if (mesh.kind == "interval") return build_interval(mesh.n_cells, mesh.length);
  // the generator puts the disk center at (radius, 0); shift it to (center_x, 0)
  const double shift = mesh.center_x - mesh.radius;
  Mesh m = build_half_circle(mesh.radius, Vec2(mesh.obstacle_x - shift, mesh.obstacle_y), mesh.obstacle_radius,
                             mesh.h);
  m.vertices.row(0).array() += shift;
  recompute_geometry(m);
  return m;
}

RunConfig parse_config_string(const std::string& text) {
  boost::property_tree::ptree pt;
  std::istringstream is(text);
  try {
    boost::property_tree::read_ini(is, pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("config error: line " + std::to_string(e.line()) + ": " + e.message());
  }
  RunConfig cfg;
  const auto b = bindings(cfg);
  std::map<std::string, const Binding*> index;
  for (const auto& x : b) index[x.key] = &x;
  for (const auto& [section, node] : pt) {
    if (node.empty()) bad(section, "unknown key (keys belong to a [section])");
    for (const auto& [key, value] : node) {
      const std::string path = section + "." + key;
      const auto it = index.find(path);
      if (it == index.end()) bad(path, "unknown key");
      it->second->set(value.data());
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config error: cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_string(ss.str());
}

std::string config_echo(const RunConfig& cfg) {
  RunConfig copy = cfg;
  std::ostringstream os;
  std::string section;
  for (const auto& x : bindings(copy)) {
    const std::string s = x.key.substr(0, x.key.find('.'));
    if (s != section) {
      os << (section.empty() ? "" : "\n") << "[" << s << "]\n";
      section = s;
    }
    os << x.key.substr(x.key.find('.') + 1) << " = " << x.get() << "\n";
  }
  return os.str();
}

}  // namespace swopt
