#pragma once

#include "swopt/swe_forward.hpp"

namespace swopt {

namespace adj {

// Adjoint advection matrices in physical variables U = (H, Q1, Q2); A = -dFx/dU^T, B = -dFy/dU^T.
template <typename S>
Mat3T<S> matrix_A(const Vec3T<S>& U, double g) {
  const S H = U[0], a = U[1] / H, b = U[2] / H;
  Mat3T<S> A;
  A << S(0), a * a - S(g) * H, a * b, S(-1), S(-2) * a, -b, S(0), S(0), -a;
  return A;
}

template <typename S>
Mat3T<S> matrix_B(const Vec3T<S>& U, double g) {
  const S H = U[0], a = U[1] / H, b = U[2] / H;
  Mat3T<S> B;
  B << S(0), a * b, b * b - S(g) * H, S(0), -b, S(0), S(-1), -a, S(-2) * b;
  return B;
}

template <typename S>
Mat3T<S> matrix_normal(const Vec3T<S>& U, const Vec2& n, double g) {
  return matrix_A(U, g) * S(n.x()) + matrix_B(U, g) * S(n.y());
}

Mat3 source_C(const Vec3& U, const Vec2& grad_z, const Vec2& grad_phi, double phi, double g);

// C - A_x - B_y with A_x, B_y from the broken gradient of the forward state (rows: H, Q1, Q2)
Mat3 source_C_tilde(const Vec3& U, const Eigen::Matrix<double, 3, 2>& grad_U, const Vec2& grad_z,
                    const Vec2& grad_phi, double phi, double g);

}  // namespace adj

struct TrackingTarget {
  Vec3 state = Vec3(1.0, 0.0, 0.0);  // (H + z, Q1, Q2) on the shore
  Vec3 weight = Vec3(1.0, 1.0, 1.0);  // diagonal of N
};

// misfit source -N^2 (U^ - U_target) for the shore facets
Vec3 adjoint_rhs(const Vec3& U, double z, const TrackingTarget& target);
Vec3 adjoint_boundary_state(const Vec3& P, swe::BoundaryKind kind, const Vec2& n);

// Spatial adjoint residual R*(P; U) - S(U), affine in P. The forward state is set per time level.
class AdjointOperator : public LocalOperator {
 public:
  AdjointOperator(const SweProblem& prob, TrackingTarget target);

  void set_state(const VectorX& u, const VectorX& mu_v);

  int n_cells() const override { return prob_->mesh().n_cells(); }
  int n_local() const override { return prob_->space().n_local(); }
  int n_facets() const override { return static_cast<int>(prob_->mesh().facets.size()); }
  std::array<int, 2> facet_cells(int f) const override { return prob_->mesh().facets[f].cell; }
  void cell_residual(int c, const double* p, double* r) const override;
  void facet_residual(int f, const double* p0, const double* p1, double* r0, double* r1) const override;
  VectorX mass() const override;
  bool affine() const override { return true; }

 private:
  struct CellData {
    std::vector<Mat3> A, B, C;  // phi A, phi B, phi C~ per quadrature point
  };
  struct FacetData {
    std::array<std::vector<Mat3>, 2> An;  // phi_K A_n(U_K), plus side normal
    std::array<std::vector<double>, 2> gH;
    std::vector<double> alpha;            // dissipation, already weighted by min phi
    std::vector<Vec3> source;             // shore misfit term
  };
  const SweProblem* prob_;
  TrackingTarget target_;
  VectorX mu_v_;
  CellTables ct_;
  FacetTables ft_;
  std::vector<CellData> cd_;
  std::vector<FacetData> fd_;
};

struct AdjointTrajectory {
  std::vector<VectorX> states;  // states[n] paired with forward states[n]; states[0] is unused and zero
  std::vector<StepReport> reports;
};

AdjointTrajectory run_adjoint(const SweProblem& prob, const Trajectory& forward, const TrackingTarget& target);

}  // namespace swopt
