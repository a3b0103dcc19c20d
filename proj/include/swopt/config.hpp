#pragma once

#include "swopt/optimizer.hpp"
#include "swopt/porosity_smoothing.hpp"

#include <string>
#include <vector>

namespace swopt {

enum class Scenario { Forward, Adjoint, Optimize, WellbalanceCheck, SmoothingStudy, GradientCheck };

Scenario parse_scenario(const std::string& name);
std::string scenario_name(Scenario s);

// Mesh source: an MSH file, or one of the built-in generators. The half circle has its diameter
// on y = 0 and its center at (center_x, 0).
struct MeshConfig {
  std::string file;
  std::string kind = "half_circle";  // half_circle | interval
  double radius = 2.5;
  double center_x = 0.0;
  double obstacle_x = 0.0;
  double obstacle_y = 0.5;
  double obstacle_radius = 0.25;
  double h = 0.3;
  int n_cells = 200;
  double length = 1.0;
};

struct PhysicsConfig {
  double g = 9.81;
  double phi_omega = 1.0;
  double phi_obstacle = 0.4;
  std::string porosity;  // optional expression evaluated at cell centroids; overrides region values
  double mu_f = 1e-2;
  double H1 = 1.0;
  std::string open_sea_mode = "surface";  // surface | depth
  std::string sediment = "0.5 - 0.25*y";
  std::string surface = "1 + exp(-15*x^2 - 15*(y - 1)^2)";  // H + z at t = 0
  std::string uH = "0";
  std::string vH = "0";
  bool shock = true;
  double shock_s0 = std::numeric_limits<double>::quiet_NaN();
  double shock_kappa = 1.0;
  double shock_mu_max = 1.0;
};

struct DiscretizationConfig {
  int degree = 1;
  double c_ip = 20.0;
  double theta = 1.0;
  double dt = 2e-3;
  double T = 2.0;
  double newton_tol = 1e-10;
  int newton_max_iter = 50;
};

struct ObjectiveConfig {
  double nu2 = 1e-4;
  double nu3 = 1e-4;
  double nu4 = 1e-2;
  double d_min = 0.1;
  double target_level = 1.0;
  double target_uH = 0.0;
  double target_vH = 0.0;
  double weight_H = 1.0;
  double weight_uH = 1.0;
  double weight_vH = 1.0;
  double eikonal_viscosity = std::numeric_limits<double>::quiet_NaN();
};

struct OptimizerConfig {
  double rho0 = 1.5;
  double shrink = 0.5;
  int max_iterations = 25;
  int max_trials = 20;
  double tol = 1e-6;
  double mu_min = 10.0;
  double mu_max = 100.0;
  double lambda = 0.0;
};

struct SmoothingConfig {
  std::vector<double> alphas{0.06, 0.04, 0.03, 0.02, 0.01, 0.005, 0.001};
  int n_cells = 1000;
  double length = 1.0;
  double x0 = 0.038;
  double x1 = 0.18;
  double phi2 = 0.4;
  double T = 0.4;
  double dt = 1e-3;
  std::string height = "1 + 0.3*exp(-100*(x - 0.5)^2)";
};

struct GradientCheckConfig {
  int directions = 3;
  unsigned seed = 1;
  std::vector<double> epsilons{1e-3, 1e-4};
};

struct WellbalanceConfig {
  double level = 1.0;
  double tol = 1e-10;
};

struct OutputConfig {
  int vtk_stride = 0;  // 0: first and last state only
};

struct RunConfig {
  Scenario scenario = Scenario::Forward;
  MeshConfig mesh;
  PhysicsConfig physics;
  DiscretizationConfig discretization;
  ObjectiveConfig objective;
  OptimizerConfig optimizer;
  SmoothingConfig smoothing;
  GradientCheckConfig gradient;
  WellbalanceConfig wellbalance;
  OutputConfig output;
  std::string output_dir = "out";
  int threads = 1;

  // throws ConfigError naming the offending key
  void validate() const;

  SweParams swe_params() const;
  ShapeSetup shape_setup() const;
  OptimizationConfig optimization() const;
  SmoothingStudyConfig smoothing_study() const;
  Mesh build_mesh() const;
};

// INI text with [section] key = value lines; '#' and ';' start comments.
// Missing keys keep their defaults and unknown keys are rejected.
RunConfig parse_config_string(const std::string& text);
RunConfig parse_config(const std::string& path);

// every effective parameter, in a form parse_config_string accepts
std::string config_echo(const RunConfig& cfg);

}  // namespace swopt
