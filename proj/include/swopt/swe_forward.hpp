#pragma once

#include "swopt/dg_core.hpp"
#include "swopt/swe_physics.hpp"

#include <functional>
#include <limits>

namespace swopt {

struct ShockParams {
  bool enabled = true;
  double s0 = std::numeric_limits<double>::quiet_NaN();  // NaN: -4 log10(p + 1)
  double kappa = 1.0;
  double mu_max = 1.0;

  double threshold(int degree) const;
};

struct SweParams {
  double g = 9.81;
  double mu_f = 1e-2;
  double c_ip = 20.0;
  double theta = 1.0;
  swe::BoundaryData boundary;
  ShockParams shock;
  NewtonOptions newton;
};

// Discretization of one porous shallow-water problem: mesh, spaces and material data.
// Porosity is cell-constant; the sediment lives in a scalar DG space of the same degree.
class SweProblem {
 public:
  SweProblem(const Mesh& mesh, int degree, SweParams params = {});

  const Mesh& mesh() const { return *mesh_; }
  int dim() const { return mesh_->dim; }
  int ncomp() const { return mesh_->dim + 1; }
  int degree() const { return space_.degree(); }
  const DGSpace& space() const { return space_; }
  const DGSpace& zspace() const { return zspace_; }
  const SweParams& params() const { return params_; }
  SweParams& params() { return params_; }

  const std::vector<double>& phi() const { return phi_; }
  const VectorX& z() const { return z_; }
  void set_porosity(double phi_omega, double phi_obstacle);
  void set_porosity(std::vector<double> per_cell);
  void set_sediment(const std::function<double(const Vec2&)>& z);
  void set_sediment_coeffs(VectorX coeffs);

  // sediment value and gradient at reference point xi of cell c
  double z_at(int c, const Vec2& xi) const;
  Vec2 grad_z_at(int c, const Vec2& xi) const;

  // L2 projection of a physical initial state given as (H + z, uH, vH)
  VectorX initial_state(const std::function<Vec3(const Vec2&)>& surface_state) const;
  VectorX lake_at_rest(double level) const;

 private:
  const Mesh* mesh_;
  DGSpace space_, zspace_;
  SweParams params_;
  std::vector<double> phi_;
  VectorX z_;
};

// per-cell artificial viscosity from the modal decay of the depth
VectorX shock_indicator(const SweProblem& prob, const VectorX& u);
VectorX shock_viscosity(const SweProblem& prob, const VectorX& u);

// Per-cell geometric tables shared by the forward and adjoint operators.
struct CellTables {
  std::vector<std::vector<Eigen::Matrix2Xd>> grad;  // [cell][q] physical basis gradients
  std::vector<std::vector<double>> wdet;            // [cell][q] quadrature weight times |det|
  std::vector<std::vector<double>> z;               // [cell][q]
  std::vector<std::vector<Vec2>> grad_z;            // [cell][q]
};
struct FacetSide {
  const Eigen::MatrixXd* phi = nullptr;  // nfq x nb
  std::vector<Eigen::Matrix2Xd> grad;    // [q] physical basis gradients
  std::vector<double> z;
  std::vector<Vec2> grad_z;
};
struct FacetTables {
  std::vector<std::array<FacetSide, 2>> side;
  std::vector<std::vector<double>> w;  // [facet][q] weight times measure
};
CellTables build_cell_tables(const SweProblem& prob);
FacetTables build_facet_tables(const SweProblem& prob);

class SweOperator : public LocalOperator {
 public:
  SweOperator(const SweProblem& prob, VectorX mu_v);

  int n_cells() const override { return prob_->mesh().n_cells(); }
  int n_local() const override { return prob_->space().n_local(); }
  int n_facets() const override { return static_cast<int>(prob_->mesh().facets.size()); }
  std::array<int, 2> facet_cells(int f) const override { return prob_->mesh().facets[f].cell; }
  void cell_residual(int c, const double* u, double* r) const override;
  void facet_residual(int f, const double* u0, const double* u1, double* r0, double* r1) const override;
  VectorX mass() const override;

  const VectorX& mu_v() const { return mu_v_; }
  void set_mu_v(VectorX mu_v) { mu_v_ = std::move(mu_v); }

 private:
  const SweProblem* prob_;
  VectorX mu_v_;
  CellTables ct_;
  FacetTables ft_;
};

// spatial residual R(u) with viscosity frozen at mu_v
VectorX swe_residual(const SweProblem& prob, const VectorX& u, const VectorX& mu_v);

struct Trajectory {
  std::vector<double> times;
  std::vector<VectorX> states;  // states[n] at times[n], n = 0..N
  std::vector<VectorX> mu_v;    // mu_v[n] used for the step n -> n + 1
  std::vector<StepReport> reports;
  int n_steps() const { return static_cast<int>(states.size()) - 1; }
};

using StepObserver = std::function<void(int step, double t, const VectorX& u)>;

Trajectory run_forward(const SweProblem& prob, const VectorX& u0, double T, double dt,
                       const StepObserver& observer = {});

struct Diagnostics {
  double mass = 0;    // integral of h
  double energy = 0;  // integral of |q|^2/(2h) + g phi (H + z)^2 / 2
  double max_speed = 0;
};
Diagnostics diagnostics(const SweProblem& prob, const VectorX& u);

// nodal H, u, v at the cell vertices for output
Eigen::MatrixXd vertex_values(const SweProblem& prob, const VectorX& u);

}  // namespace swopt
