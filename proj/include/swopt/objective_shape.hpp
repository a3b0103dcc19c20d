#pragma once

#include "swopt/swe_adjoint.hpp"

#include <limits>

namespace swopt {

struct ObjectiveWeights {
  TrackingTarget tracking;
  double nu2 = 1e-4;
  double nu3 = 1e-4;
  double nu4 = 1e-2;
  double d_min = 0.1;
};

// Vertex-based fields: one column per mesh vertex.
using VertexField = Eigen::Matrix2Xd;

inline double apply(const VertexField& gradient, const VertexField& V) { return gradient.cwiseProduct(V).sum(); }

double eval_J1(const SweProblem& prob, const Trajectory& tr, const TrackingTarget& target);
double eval_J2(const Mesh& mesh, double nu2);
double eval_J3(const Mesh& mesh, double nu3);

struct EikonalOptions {
  double viscosity = std::numeric_limits<double>::quiet_NaN();  // NaN: largest cell diameter
  double regularization = 1e-6;
  double tol = 1e-10;
  int max_iter = 100;
};

// Continuous P1 signed distance: zero on Gamma3, positive in OmegaTilde, negative in D.
struct SignedDistance {
  Eigen::VectorXd w;   // vertex values
  double viscosity = 0;
  int iterations = 0;
};

// zero_set lists the vertices with w = 0; empty means the Gamma3 vertices.
SignedDistance solve_eikonal(const Mesh& mesh, const EikonalOptions& opts = {}, std::vector<int> zero_set = {});
double sdf_value(const Mesh& mesh, const SignedDistance& d, const Vec2& x, int* cell = nullptr);
Vec2 sdf_gradient(const Mesh& mesh, const SignedDistance& d, int cell);

double eval_J4(const Mesh& mesh, const SignedDistance& sdf, double nu4, double d_min);

// turning angle over mean adjacent edge length at every Gamma3 vertex (zero elsewhere);
// positive where D is convex
Eigen::VectorXd curvature_gamma3(const Mesh& mesh);
// same rule on a closed polygon given by its corner points
Eigen::VectorXd polygon_curvature(const std::vector<Vec2>& pts);
// unit normals at Gamma3 vertices, bisecting the adjacent facet normals (pointing out of D)
VertexField vertex_normals_gamma3(const Mesh& mesh);

// Volumetric shape derivative of J1 tested with the P1 hat fields. Cells are skipped when no
// vertex in mask is set (empty mask: all cells).
VertexField assemble_DJ1(const SweProblem& prob, const Trajectory& tr, const AdjointTrajectory& adj,
                         const std::vector<bool>& mask = {});
VertexField assemble_DJ2(const Mesh& mesh, double nu2);
VertexField assemble_DJ3(const Mesh& mesh, double nu3);
VertexField assemble_DJ4(const Mesh& mesh, const SignedDistance& sdf, double nu4, double d_min);

// vertices on Gamma3 or sharing a cell with one, minus vertices on the outer boundary
std::vector<bool> gradient_support(const Mesh& mesh);

struct ShapeGradient {
  VertexField total, dj1, dj2, dj3, dj4;
};

ShapeGradient total_shape_derivative(const SweProblem& prob, const Trajectory& tr, const AdjointTrajectory& adj,
                                     const SignedDistance& sdf, const ObjectiveWeights& w);

struct ObjectiveValue {
  double J1 = 0, J2 = 0, J3 = 0, J4 = 0;
  double total() const { return J1 + J2 + J3 + J4; }
};

}  // namespace swopt
