#include "swopt/dg_core.hpp"

#include <Eigen/SparseLU>

#include <cmath>

namespace swopt {

QuadRule gauss_legendre(int n) {
  QuadRule r;
  for (int i = 0; i < n; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1, p1 = x;
      dp = n * (x * p1 - p0) / (x * x - 1);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    double p0 = 1, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1);
    r.points.emplace_back(0.5 * (x + 1), 0.0);
    r.weights.push_back(1.0 / ((1 - x * x) * dp * dp));
  }
  return r;
}

QuadRule cell_quadrature(int dim, int order) {
  if (dim == 1) return gauss_legendre(std::max(1, (order + 2) / 2));
  const int n = std::max(1, (order + 3) / 2);
  const QuadRule g = gauss_legendre(n);
  QuadRule r;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double u = g.points[i].x(), v = g.points[j].x();
      r.points.emplace_back(u, v * (1 - u));
      r.weights.push_back(g.weights[i] * g.weights[j] * (1 - u));
    }
  return r;
}

QuadRule facet_quadrature(int order) { return gauss_legendre(std::max(1, (order + 2) / 2)); }

ModalBasis::ModalBasis(int dim, int degree) : dim_(dim), degree_(degree) {
  if (degree < 0) throw Error("argument error: polynomial degree must be >= 0");
  for (int d = 0; d <= degree; ++d) {
    if (dim == 1) {
      exps_.push_back({d, 0});
    } else {
      for (int b = 0; b <= d; ++b) exps_.push_back({d - b, b});
    }
  }
  const int n = size();
  auto fact = [](int k) {
    double f = 1;
    for (int i = 2; i <= k; ++i) f *= i;
    return f;
  };
  Eigen::MatrixXd M(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const int a = exps_[i][0] + exps_[j][0], b = exps_[i][1] + exps_[j][1];
      M(i, j) = dim == 1 ? 1.0 / (a + 1) : fact(a) * fact(b) / fact(a + b + 2);
    }
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  const Eigen::MatrixXd L = llt.matrixL();
  coeff_ = L.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(n, n));
}

int ModalBasis::size_below(int d) const {
  int k = 0;
  for (const auto& e : exps_)
    if (e[0] + e[1] < d) ++k;
  return k;
}

double ModalBasis::eval(int i, const Vec2& xi) const {
  double s = 0;
  for (int k = 0; k <= i; ++k) s += coeff_(i, k) * std::pow(xi.x(), exps_[k][0]) * std::pow(xi.y(), exps_[k][1]);
  return s;
}

Vec2 ModalBasis::grad(int i, const Vec2& xi) const {
  Vec2 g = Vec2::Zero();
  for (int k = 0; k <= i; ++k) {
    const int a = exps_[k][0], b = exps_[k][1];
    if (a > 0) g.x() += coeff_(i, k) * a * std::pow(xi.x(), a - 1) * std::pow(xi.y(), b);
    if (b > 0) g.y() += coeff_(i, k) * b * std::pow(xi.x(), a) * std::pow(xi.y(), b - 1);
  }
  return g;
}

Eigen::VectorXd ModalBasis::eval_all(const Vec2& xi) const {
  Eigen::VectorXd v(size());
  for (int i = 0; i < size(); ++i) v[i] = eval(i, xi);
  return v;
}

Eigen::Matrix2Xd ModalBasis::grad_all(const Vec2& xi) const {
  Eigen::Matrix2Xd g(2, size());
  for (int i = 0; i < size(); ++i) g.col(i) = grad(i, xi);
  return g;
}

DGSpace::DGSpace(const Mesh& mesh, int degree, int ncomp, int quad_order)
    : mesh_(&mesh), degree_(degree), ncomp_(ncomp), basis_(mesh.dim, degree) {
  const int order = quad_order > 0 ? quad_order : 2 * degree + 2;
  cq_ = cell_quadrature(mesh.dim, order);
  fq_ = mesh.dim == 1 ? QuadRule{{Vec2::Zero()}, {1.0}} : facet_quadrature(order);
  phi_q_.resize(cq_.size(), nb());
  for (int q = 0; q < cq_.size(); ++q) {
    phi_q_.row(q) = basis_.eval_all(cq_.points[q]).transpose();
    dphi_q_.push_back(basis_.grad_all(cq_.points[q]));
  }
  const int nf = mesh.dim == 1 ? 2 : 3;
  phi_f_.resize(nf * 2);
  dphi_f_.resize(nf * 2);
  for (int k = 0; k < nf; ++k)
    for (int flip = 0; flip < 2; ++flip) {
      Eigen::MatrixXd P(fq_.size(), nb());
      std::vector<Eigen::Matrix2Xd> D;
      for (int q = 0; q < fq_.size(); ++q) {
        const Vec2 xi = ref_facet_point(k, flip, q);
        P.row(q) = basis_.eval_all(xi).transpose();
        D.push_back(basis_.grad_all(xi));
      }
      phi_f_[k * 2 + flip] = P;
      dphi_f_[k * 2 + flip] = D;
    }
  refresh_geometry();
}

void DGSpace::refresh_geometry() {
  const int nc = mesh_->n_cells();
  det_.resize(nc);
  h_.resize(nc);
  ijt_.resize(nc);
  for (int c = 0; c < nc; ++c) {
    const Mat2 J = mesh_->jacobian(c);
    det_[c] = J.determinant();
    ijt_[c] = J.inverse().transpose();
    h_[c] = mesh_->diameter(c);
  }
}

Vec2 DGSpace::ref_facet_point(int local, bool flip, int q) const {
  if (mesh_->dim == 1) return Vec2(local == 0 ? 0.0 : 1.0, 0.0);
  static const Vec2 V[3] = {Vec2(0, 0), Vec2(1, 0), Vec2(0, 1)};
  double t = fq_.points[q].x();
  if (flip) t = 1 - t;
  const Vec2 a = V[(local + 1) % 3], b = V[(local + 2) % 3];
  return a + t * (b - a);
}

Vec2 DGSpace::ref_to_phys(int c, const Vec2& xi) const {
  const auto& v = mesh_->cells[c];
  return mesh_->vertex(v[0]) + mesh_->jacobian(c) * xi;
}

Vec2 DGSpace::cell_point(int c, int q) const { return ref_to_phys(c, cq_.points[q]); }

Vec2 DGSpace::facet_point(int f, int q) const {
  const Facet& fc = mesh_->facets[f];
  return ref_to_phys(fc.cell[0], ref_facet_point(fc.local[0], false, q));
}

double evaluate(const DGField& f, int cell, const Vec2& xi, int comp) {
  const DGSpace& s = *f.space;
  if (cell < 0 || cell >= s.mesh().n_cells()) throw Error("cell index out of range");
  const Eigen::VectorXd phi = s.basis().eval_all(xi);
  return f.coeffs.segment(s.index(cell, comp, 0), s.nb()).dot(phi);
}

Eigen::VectorXd evaluate_all(const DGField& f, int cell, const Vec2& xi) {
  const DGSpace& s = *f.space;
  Eigen::VectorXd out(s.ncomp());
  for (int k = 0; k < s.ncomp(); ++k) out[k] = evaluate(f, cell, xi, k);
  return out;
}

void project(DGField& out, const std::function<Eigen::VectorXd(const Vec2&)>& fn) {
  const DGSpace& s = *out.space;
  const auto& cq = s.cell_rule();
  out.coeffs.setZero(s.ndof());
  for (int c = 0; c < s.mesh().n_cells(); ++c)
    for (int q = 0; q < cq.size(); ++q) {
      const Eigen::VectorXd v = fn(s.cell_point(c, q));
      for (int k = 0; k < s.ncomp(); ++k)
        for (int b = 0; b < s.nb(); ++b) out.coeffs[s.index(c, k, b)] += cq.weights[q] * v[k] * s.phi_q()(q, b);
    }
}

double integrate(const DGField& f, int comp) {
  const DGSpace& s = *f.space;
  const auto& cq = s.cell_rule();
  double total = 0;
  for (int c = 0; c < s.mesh().n_cells(); ++c) {
    const auto a = f.coeffs.segment(s.index(c, comp, 0), s.nb());
    for (int q = 0; q < cq.size(); ++q) total += s.det(c) * cq.weights[q] * s.phi_q().row(q).dot(a);
  }
  return total;
}

AverageJump facet_average_jump(const FacetTrace& t) {
  AverageJump r;
  r.average = 0.5 * (t.plus + t.minus);
  const int d = 2;
  r.jump.resize(t.plus.size(), d);
  for (int k = 0; k < t.plus.size(); ++k) r.jump.row(k) = (t.plus[k] - t.minus[k]) * t.normal.transpose();
  return r;
}

Eigen::MatrixXd sip_penalty(const Eigen::MatrixXd& jump, const Eigen::VectorXd& g_plus,
                            const Eigen::VectorXd& g_minus, double c_ip, int p_dg, double h) {
  if (!(h > 0)) throw Error("argument error: sip_penalty needs h > 0");
  const double p = std::max(p_dg, 1);
  const double sigma = c_ip * p * p / h;
  Eigen::MatrixXd out = jump;
  for (int k = 0; k < jump.rows(); ++k) out.row(k) *= sigma * 0.5 * (g_plus[k] + g_minus[k]);
  return out;
}

VectorX assemble_residual(const LocalOperator& op, const VectorX& u) {
  const int nl = op.n_local();
  VectorX r = VectorX::Zero(op.ndof());
  for (int c = 0; c < op.n_cells(); ++c) op.cell_residual(c, u.data() + c * nl, r.data() + c * nl);
  for (int f = 0; f < op.n_facets(); ++f) {
    const auto cs = op.facet_cells(f);
    op.facet_residual(f, u.data() + cs[0] * nl, cs[1] >= 0 ? u.data() + cs[1] * nl : nullptr,
                      r.data() + cs[0] * nl, cs[1] >= 0 ? r.data() + cs[1] * nl : nullptr);
  }
  return r;
}

SparseMatrix assemble_jacobian(const LocalOperator& op, const VectorX& u, double fd_eps) {
  const int nl = op.n_local();
  const bool lin = op.affine();
  std::vector<Triplet> trip;
  trip.reserve(static_cast<size_t>(op.n_cells()) * nl * nl * 4);
  Eigen::VectorXd ul(nl), r0(nl), rp(nl);
  for (int c = 0; c < op.n_cells(); ++c) {
    ul = u.segment(c * nl, nl);
    r0.setZero();
    op.cell_residual(c, ul.data(), r0.data());
    for (int j = 0; j < nl; ++j) {
      const double e = lin ? 1.0 : fd_eps * std::max(1.0, std::abs(ul[j]));
      const double keep = ul[j];
      ul[j] = keep + e;
      rp.setZero();
      op.cell_residual(c, ul.data(), rp.data());
      ul[j] = keep;
      for (int i = 0; i < nl; ++i) {
        const double v = (rp[i] - r0[i]) / e;
        trip.emplace_back(c * nl + i, c * nl + j, v);
      }
    }
  }
  Eigen::VectorXd u0(nl), u1(nl), a0(nl), a1(nl), b0(nl), b1(nl);
  for (int f = 0; f < op.n_facets(); ++f) {
    const auto cs = op.facet_cells(f);
    const bool bnd = cs[1] < 0;
    u0 = u.segment(cs[0] * nl, nl);
    if (!bnd) u1 = u.segment(cs[1] * nl, nl);
    a0.setZero();
    a1.setZero();
    op.facet_residual(f, u0.data(), bnd ? nullptr : u1.data(), a0.data(), bnd ? nullptr : a1.data());
    for (int side = 0; side < (bnd ? 1 : 2); ++side) {
      Eigen::VectorXd& us = side == 0 ? u0 : u1;
      const int cj = cs[side];
      for (int j = 0; j < nl; ++j) {
        const double e = lin ? 1.0 : fd_eps * std::max(1.0, std::abs(us[j]));
        const double keep = us[j];
        us[j] = keep + e;
        b0.setZero();
        b1.setZero();
        op.facet_residual(f, u0.data(), bnd ? nullptr : u1.data(), b0.data(), bnd ? nullptr : b1.data());
        us[j] = keep;
        for (int i = 0; i < nl; ++i) {
          trip.emplace_back(cs[0] * nl + i, cj * nl + j, (b0[i] - a0[i]) / e);
          if (!bnd) trip.emplace_back(cs[1] * nl + i, cj * nl + j, (b1[i] - a1[i]) / e);
        }
      }
    }
  }
  SparseMatrix J(op.ndof(), op.ndof());
  J.setFromTriplets(trip.begin(), trip.end());
  return J;
}

void ThetaStepper::factor(const LocalOperator& op, const VectorX& u, const VectorX& M, double dt, double theta) {
  A_ = assemble_jacobian(op, u, opts_.fd_eps);
  A_ *= theta;
  for (int i = 0; i < op.ndof(); ++i) A_.coeffRef(i, i) += M[i] / dt;
  A_.makeCompressed();
  have_lu_ = false;
  if (opts_.iterative && !krylov_failed_) {
    krylov_.setTolerance(opts_.linear_tol);
    krylov_.setMaxIterations(200);
    krylov_.compute(A_);
  }
  have_matrix_ = true;
  dt_ = dt;
  theta_ = theta;
  op_ = &op;
  ++builds_;
}

VectorX ThetaStepper::solve(const VectorX& b) {
  if (opts_.iterative && !krylov_failed_) {
    VectorX x = krylov_.solve(b);
    const bool ok = krylov_.info() == Eigen::Success && x.allFinite();
    // slow Krylov convergence means the direct solver is cheaper from here on
    if (!ok || krylov_.iterations() > 40) krylov_failed_ = true;
    if (ok) return x;
  }
  if (!have_lu_) {
    lu_.compute(A_);
    if (lu_.info() != Eigen::Success) throw SolverError("Jacobian factorization failed");
    have_lu_ = true;
  }
  return lu_.solve(b);
}

StepReport ThetaStepper::step(const LocalOperator& op, const VectorX& u0, double dt, double theta, VectorX& u1,
                              const VectorX* rhs) {
  if (!(dt > 0)) throw Error("argument error: dt must be positive");
  const VectorX M = op.mass();
  StepReport rep;
  VectorX base = VectorX::Zero(op.ndof());
  if (theta < 1.0) base += (1.0 - theta) * assemble_residual(op, u0);
  if (rhs) base -= *rhs;
  if (theta <= 0.0) {
    u1 = u0 - dt * base.cwiseQuotient(M);
    rep.converged = true;
    return rep;
  }
  auto F = [&](const VectorX& u) {
    VectorX r = M.cwiseProduct(u - u0) / dt + base;
    r += theta * assemble_residual(op, u);
    return r;
  };
  const double scale = std::max(1.0, (M.cwiseProduct(u0) / dt).lpNorm<Eigen::Infinity>());
  VectorX u = u0;
  VectorX Fu = F(u);
  double fn = Fu.lpNorm<Eigen::Infinity>();
  rep.residual = fn;
  if (fn <= opts_.tol * scale) {
    u1 = u;
    rep.converged = true;
    return rep;
  }
  const bool reuse = opts_.lag_jacobian && have_matrix_ && op_ == &op && dt_ == dt && theta_ == theta &&
                     A_.rows() == op.ndof();
  bool fresh = false;
  if (!reuse) {
    factor(op, u, M, dt, theta);
    fresh = true;
  }
  for (int it = 0; it < opts_.max_iter; ++it) {
    const VectorX delta = solve(-Fu);
    double lam = 1.0;
    VectorX ut;
    VectorX Ft;
    double ftn = 0;
    bool accepted = false;
    for (int ls = 0; ls < 8; ++ls) {
      ut = u + lam * delta;
      bool finite = ut.allFinite();
      if (finite) {
        try {
          Ft = F(ut);
          ftn = Ft.lpNorm<Eigen::Infinity>();
          finite = std::isfinite(ftn);
        } catch (const SolverError&) {
          finite = false;
        }
      }
      if (finite && (ftn < fn || ls == 7)) {
        accepted = true;
        break;
      }
      if (!fresh) break;  // stale Jacobian: rebuild before damping
      lam *= 0.5;
    }
    const bool poor = !accepted || ftn > 0.1 * fn || lam < 1.0;
    if (poor && !fresh) {
      factor(op, u, M, dt, theta);
      fresh = true;
      continue;
    }
    if (!accepted) throw SolverError("Newton iterate left the admissible set");
    const double step_norm = (lam * delta).lpNorm<Eigen::Infinity>();
    u = ut;
    Fu = Ft;
    fn = ftn;
    rep.iterations = it + 1;
    rep.residual = fn;
    if (fn <= opts_.tol * scale || step_norm <= opts_.tol * std::max(1.0, u.lpNorm<Eigen::Infinity>())) {
      rep.converged = true;
      break;
    }
    if (poor) {
      factor(op, u, M, dt, theta);
      fresh = true;
    } else {
      fresh = false;
    }
  }
  u1 = u;
  return rep;
}

StepReport theta_step(const LocalOperator& op, const VectorX& u0, double dt, double theta, VectorX& u1,
                      const NewtonOptions& opts) {
  ThetaStepper s(opts);
  return s.step(op, u0, dt, theta, u1);
}

}  // namespace swopt
