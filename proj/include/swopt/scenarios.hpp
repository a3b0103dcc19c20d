#pragma once

#include "swopt/config.hpp"

#include <iosfwd>
#include <memory>

namespace swopt {

// problem of a forward or well-balance run: porosity from the expression when given, else from regions
std::unique_ptr<SweProblem> make_problem(const Mesh& mesh, const RunConfig& cfg);

struct WellbalanceResult {
  double max_q = 0;        // max over steps and sample points of |uh|, |vh|
  double max_surface = 0;  // same for |h/phi + z - level|
  int steps = 0;
};

// starts from the lake at rest and samples every cell at its vertices and quadrature points
WellbalanceResult wellbalance_check(const SweProblem& prob, double level, double T, double dt);

// normal random vectors on the gradient support, zero elsewhere
std::vector<VertexField> random_directions(const Mesh& mesh, int n, unsigned seed);

struct GradientCheckRow {
  int direction = 0;
  double eps = 0, dj = 0, fd = 0, rel = 0;
};

struct GradientCheckReport {
  std::vector<GradientCheckRow> rows;
  double dj2_dilation = 0;  // DJ2 applied to x - x_c
  double dj2_exact = 0;     // 2 nu2 |D|
};

// DJ[V] against central differences of J for every direction and step
GradientCheckReport gradient_check(const Mesh& mesh, const ShapeSetup& setup, const std::vector<VertexField>& dirs,
                                   const std::vector<double>& eps, int threads = 1);

// runs cfg.scenario, writes its artifacts into cfg.output_dir and returns the exit status
int run_scenario(const RunConfig& cfg, std::ostream& log);

}  // namespace swopt
