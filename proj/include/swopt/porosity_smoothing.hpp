#pragma once

#include "swopt/swe_forward.hpp"

namespace swopt {

struct SmoothedPorosity {
  double alpha = 0.01;
  double x0 = 0.038;
  double x1 = 0.18;
  double phi2 = 0.4;

  void validate() const;
};

// cubic step: 1 outside [x0 - alpha, x1 + alpha], 0 on [x0 + alpha, x1 - alpha]
double eval_psi(double x, const SmoothedPorosity& p);
double eval_phi_alpha(double x, const SmoothedPorosity& p);
// alpha -> 0 limit: phi2 on (x0, x1), 1 elsewhere
double eval_phi_sharp(double x, const SmoothedPorosity& p);

struct ErrorNorms {
  double E_H = 0, E_uH = 0;            // space-time L2
  double E_H_cell = 0, E_uH_cell = 0;  // same sums over cell means without the cell measure
};

// differences of physical H and uH over the common time grid of two runs on one mesh
ErrorNorms error_norms(const SweProblem& a, const Trajectory& ta, const SweProblem& b, const Trajectory& tb);

struct SmoothingStudyConfig {
  int n_cells = 1000;
  double length = 1.0;
  double T = 0.4;
  double dt = 1e-3;
  double x0 = 0.038;
  double x1 = 0.18;
  double phi2 = 0.4;
  int degree = 1;
  SweParams swe;
  std::function<double(double)> initial_height = [](double x) { return 1.0 + 0.3 * std::exp(-100.0 * (x - 0.5) * (x - 0.5)); };
};

struct SmoothingRow {
  double alpha = 0;
  ErrorNorms norms;
};

// alpha runs are independent and share the sharp reference; threads > 1 runs them concurrently
std::vector<SmoothingRow> run_convergence_study(const std::vector<double>& alphas, const SmoothingStudyConfig& cfg,
                                                int threads = 1);

}  // namespace swopt
