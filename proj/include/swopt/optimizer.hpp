#pragma once

#include "swopt/elasticity.hpp"
#include "swopt/objective_shape.hpp"

#include <memory>
#include <optional>

namespace swopt {

// Physics and objective of one shape problem; sediment and initial surface are spatial data on the
// initial mesh. The sediment is projected once and then carried with the mesh.
struct ShapeSetup {
  int degree = 1;
  SweParams swe;
  double phi_omega = 1.0;
  double phi_obstacle = 0.4;
  std::function<double(const Vec2&)> sediment = [](const Vec2&) { return 0.0; };
  std::function<Vec3(const Vec2&)> initial_surface = [](const Vec2&) { return Vec3(1.0, 0.0, 0.0); };
  double T = 2.0;
  double dt = 2e-3;
  ObjectiveWeights weights;
  EikonalOptions eikonal;
};

// A mesh together with its material data, forward run and objective value.
struct ShapeState {
  std::unique_ptr<Mesh> mesh;
  std::unique_ptr<SweProblem> problem;
  Trajectory forward;
  SignedDistance sdf;
  ObjectiveValue J;
};

// sediment of the setup projected on mesh, to be carried by later deformations
VectorX project_sediment(const Mesh& mesh, const ShapeSetup& setup);
ShapeState evaluate_shape(const Mesh& mesh, const VectorX& sediment_coeffs, const ShapeSetup& setup);

struct OptimizationConfig {
  ShapeSetup setup;
  double rho0 = 1.5;
  double shrink = 0.5;
  int max_iterations = 25;
  int max_trials = 20;
  double tol = 1e-6;
  double mu_min = 10.0;
  double mu_max = 100.0;
  double lambda = 0.0;

  void validate() const;
};

using TrialObjective = std::function<std::optional<double>(const Mesh&)>;  // nullopt: evaluation failed

struct LineSearchResult {
  bool accepted = false;
  double step = 0.0;
  int trials = 0;
  double J = 0.0;
  Mesh mesh;
};

// tries x - rho W for rho = rho0, rho0 shrink, ...; rejects invalid meshes and non-decreasing objectives
LineSearchResult line_search(const Mesh& mesh, const Displacement& W, double rho0, double J_current,
                             const TrialObjective& objective, double shrink = 0.5, int max_trials = 20);

struct IterationRecord {
  int iteration = 0;
  ObjectiveValue J;
  double dj_norm = 0.0;  // sqrt(DJ[W])
  double step = 0.0;     // step that produced this iterate
  int trials = 0;
};

struct OptimizationResult {
  std::vector<IterationRecord> history;
  std::string stop_reason;  // converged | max_iterations | line_search_failed | error
  std::string error;
  Mesh final_mesh;
};

struct IterationData {
  const IterationRecord& record;
  const ShapeState& state;
  const AdjointTrajectory& adjoint;
  const ShapeGradient& gradient;
  const LameField& lame;
  const Displacement& W;
};
using IterationObserver = std::function<void(const IterationData&)>;

// Left/right mismatch of the Gamma3 displacement from initial to deformed about the vertical line through
// the initial obstacle centroid: |d - M d(mirror)| / |d| summed over Gamma3 vertices, with the mirrored
// displacement interpolated along the loop by angle. 0 for a perfectly symmetric deformation.
double symmetry_mismatch(const Mesh& initial, const Mesh& deformed);

OptimizationResult optimize(const Mesh& initial, const OptimizationConfig& config,
                            const IterationObserver& observer = {});

}  // namespace swopt
