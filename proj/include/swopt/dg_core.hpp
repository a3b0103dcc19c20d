#pragma once

#include "swopt/mesh.hpp"

#include <functional>
#include <memory>

namespace swopt {

struct QuadRule {
  std::vector<Vec2> points;
  std::vector<double> weights;  // sum to the reference measure (1/2 triangle, 1 interval)
  int size() const { return static_cast<int>(weights.size()); }
};

QuadRule gauss_legendre(int n);  // on [0,1]
QuadRule cell_quadrature(int dim, int order);
QuadRule facet_quadrature(int order);

// Orthonormal hierarchical modal basis on the reference simplex, built by Gram-Schmidt
// on monomials ordered by total degree.
class ModalBasis {
 public:
  ModalBasis() = default;
  ModalBasis(int dim, int degree);

  int dim() const { return dim_; }
  int degree() const { return degree_; }
  int size() const { return static_cast<int>(exps_.size()); }
  // number of modes of total degree < d
  int size_below(int d) const;

  double eval(int i, const Vec2& xi) const;
  Vec2 grad(int i, const Vec2& xi) const;
  Eigen::VectorXd eval_all(const Vec2& xi) const;
  Eigen::Matrix2Xd grad_all(const Vec2& xi) const;
  // monomial coefficients of mode i, paired with exponents()
  const Eigen::MatrixXd& monomial_coeffs() const { return coeff_; }
  const std::vector<std::array<int, 2>>& exponents() const { return exps_; }

 private:
  int dim_ = 1, degree_ = 0;
  std::vector<std::array<int, 2>> exps_;
  Eigen::MatrixXd coeff_;  // row i: coefficients of mode i over monomials
};

// Broken polynomial space on a mesh. Coefficient layout: ((cell * ncomp) + comp) * nb + b.
class DGSpace {
 public:
  DGSpace(const Mesh& mesh, int degree, int ncomp, int quad_order = -1);

  const Mesh& mesh() const { return *mesh_; }
  int degree() const { return degree_; }
  int ncomp() const { return ncomp_; }
  int nb() const { return basis_.size(); }
  int n_local() const { return ncomp_ * nb(); }
  int ndof() const { return mesh_->n_cells() * n_local(); }
  int index(int cell, int comp, int b) const { return (cell * ncomp_ + comp) * nb() + b; }
  const ModalBasis& basis() const { return basis_; }
  const QuadRule& cell_rule() const { return cq_; }
  const QuadRule& facet_rule() const { return fq_; }

  double det(int c) const { return det_[c]; }
  const Mat2& inv_jt(int c) const { return ijt_[c]; }
  double h(int c) const { return h_[c]; }

  // reference basis tables
  const Eigen::MatrixXd& phi_q() const { return phi_q_; }                 // nq x nb
  const std::vector<Eigen::Matrix2Xd>& dphi_q() const { return dphi_q_; }  // per q: 2 x nb reference gradients
  // trace tables for a cell's local facet; flip reverses the facet parameter
  const Eigen::MatrixXd& phi_f(int local, bool flip) const { return phi_f_[local * 2 + flip]; }
  const std::vector<Eigen::Matrix2Xd>& dphi_f(int local, bool flip) const { return dphi_f_[local * 2 + flip]; }
  // physical point of a cell quadrature point / of facet quadrature point q (cell[0] orientation)
  Vec2 cell_point(int c, int q) const;
  Vec2 facet_point(int f, int q) const;
  Vec2 ref_to_phys(int c, const Vec2& xi) const;
  Vec2 ref_facet_point(int local, bool flip, int q) const;

  void refresh_geometry();

 private:
  const Mesh* mesh_;
  int degree_, ncomp_;
  ModalBasis basis_;
  QuadRule cq_, fq_;
  std::vector<double> det_, h_;
  std::vector<Mat2> ijt_;
  Eigen::MatrixXd phi_q_;
  std::vector<Eigen::Matrix2Xd> dphi_q_;
  std::vector<Eigen::MatrixXd> phi_f_;
  std::vector<std::vector<Eigen::Matrix2Xd>> dphi_f_;
};

struct DGField {
  const DGSpace* space = nullptr;
  VectorX coeffs;

  DGField() = default;
  explicit DGField(const DGSpace& s) : space(&s), coeffs(VectorX::Zero(s.ndof())) {}
};

double evaluate(const DGField& f, int cell, const Vec2& xi, int comp = 0);
Eigen::VectorXd evaluate_all(const DGField& f, int cell, const Vec2& xi);
// f(x) returns ncomp values
void project(DGField& out, const std::function<Eigen::VectorXd(const Vec2&)>& f);
// integral of component comp over the mesh
double integrate(const DGField& f, int comp);

struct FacetTrace {
  int facet = -1;
  Eigen::VectorXd plus, minus;
  Vec2 normal = Vec2::Zero();
};

struct AverageJump {
  Eigen::VectorXd average;
  Eigen::MatrixXd jump;  // rows: components, columns: spatial directions
};
AverageJump facet_average_jump(const FacetTrace& t);

// penalty tensor C_IP max(p,1)^2 / h {{G}} [[U]] for diagonal diffusion coefficient traces
Eigen::MatrixXd sip_penalty(const Eigen::MatrixXd& jump, const Eigen::VectorXd& g_plus,
                            const Eigen::VectorXd& g_minus, double c_ip, int p_dg, double h);

// Residual written as a sum of cell-local and facet-local kernels, the form every
// solver in this library shares. Kernels accumulate into the output arrays.
class LocalOperator {
 public:
  virtual ~LocalOperator() = default;
  virtual int n_cells() const = 0;
  virtual int n_local() const = 0;
  virtual int n_facets() const = 0;
  virtual std::array<int, 2> facet_cells(int f) const = 0;
  virtual void cell_residual(int c, const double* u, double* r) const = 0;
  // u1/r1 are null on boundary facets
  virtual void facet_residual(int f, const double* u0, const double* u1, double* r0, double* r1) const = 0;
  // diagonal of the time-term mass matrix
  virtual VectorX mass() const = 0;
  // true when the residual is affine in u, so unit perturbations give exact Jacobian columns
  virtual bool affine() const { return false; }

  int ndof() const { return n_cells() * n_local(); }
};

VectorX assemble_residual(const LocalOperator& op, const VectorX& u);
SparseMatrix assemble_jacobian(const LocalOperator& op, const VectorX& u, double fd_eps = 1e-7);

struct NewtonOptions {
  double tol = 1e-10;
  int max_iter = 50;
  double fd_eps = 1e-7;
  // BiCGSTAB with diagonal preconditioning, falling back to sparse LU
  bool iterative = true;
  double linear_tol = 1e-13;
  // keep the Jacobian across steps while Newton contracts well
  bool lag_jacobian = true;
};

struct StepReport {
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;
};

class ThetaStepper {
 public:
  explicit ThetaStepper(NewtonOptions opts = {}) : opts_(opts) {}
  // M(u1 - u0)/dt + theta R(u1) + (1 - theta) R(u0) = rhs; rhs is an optional constant forcing
  StepReport step(const LocalOperator& op, const VectorX& u0, double dt, double theta, VectorX& u1,
                  const VectorX* rhs = nullptr);
  // drop the cached Jacobian; needed when the operator changes between steps
  void reset() { have_matrix_ = false; }
  int jacobian_builds() const { return builds_; }

 private:
  void factor(const LocalOperator& op, const VectorX& u, const VectorX& M, double dt, double theta);
  VectorX solve(const VectorX& b);

  NewtonOptions opts_;
  SparseMatrix A_;
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu_;
  Eigen::BiCGSTAB<SparseMatrix> krylov_;
  bool have_matrix_ = false, have_lu_ = false, krylov_failed_ = false;
  double dt_ = 0, theta_ = 0;
  const LocalOperator* op_ = nullptr;
  int builds_ = 0;
};

StepReport theta_step(const LocalOperator& op, const VectorX& u0, double dt, double theta, VectorX& u1,
                      const NewtonOptions& opts = {});

}  // namespace swopt
