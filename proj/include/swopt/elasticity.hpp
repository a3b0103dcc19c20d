#pragma once

#include "swopt/mesh.hpp"

namespace swopt {

// P1 harmonic interpolation of vertex Dirichlet data (fixed lists vertex ids and values)
Eigen::VectorXd solve_harmonic(const Mesh& mesh, const std::vector<int>& fixed, const std::vector<double>& values);

struct LameField {
  Eigen::VectorXd mu;  // per vertex
  double lambda = 0.0;
};

// mu_max on Gamma3, mu_min on the outer boundary
LameField solve_lame_mu(const Mesh& mesh, double mu_min, double mu_max, double lambda = 0.0);

SparseMatrix elasticity_matrix(const Mesh& mesh, const LameField& lame);

// energy of W: integral of sigma(W) : eps(W)
double elastic_energy(const Mesh& mesh, const LameField& lame, const Displacement& W);

// Riesz representative of rhs: W = 0 on the outer boundary, a(W, V) = rhs[V] for all V
Displacement solve_elasticity(const Mesh& mesh, const LameField& lame, const Eigen::Matrix2Xd& rhs,
                              double tol = 1e-10);

}  // namespace swopt
