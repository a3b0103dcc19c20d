#include "swopt/swe_adjoint.hpp"

#include <unsupported/Eigen/AutoDiff>

#include <sstream>

namespace swopt {

namespace adj {

Mat3 source_C(const Vec3&U, const Vec2& grad_z, const Vec2& grad_phi, double phi, double g) {
  Mat3 C = Mat3::Zero();
  C(0, 1) = g * grad_z.x() - g * U[0] / phi * grad_phi.x();
  C(0, 2) = g * grad_z.y() - g * U[0] / phi * grad_phi.y();
  return C;
}

Mat3 source_C_tilde(const Vec3& U, const Eigen::Matrix<double, 3, 2>& grad_U, const Vec2& grad_z,
                    const Vec2& grad_phi, double phi, double g) {
  using AD = Eigen::AutoDiffScalar<Eigen::Vector2d>;
  Vec3T<AD> Ua;
  for (int k = 0; k < 3; ++k) Ua[k] = AD(U[k], grad_U.row(k).transpose());
  const Mat3T<AD> A = matrix_A(Ua, g), B = matrix_B(Ua, g);
  Mat3 out = source_C(U, grad_z, grad_phi, phi, g);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out(i, j) -= A(i, j).derivatives()[0] + B(i, j).derivatives()[1];
  return out;
}

}  // namespace adj

Vec3 adjoint_rhs(const Vec3& U, double z, const TrackingTarget& target) {
  Vec3 hat = U;
  hat[0] += z;
  return -(target.weight.array().square() * (hat - target.state).array()).matrix();
}

Vec3 adjoint_boundary_state(const Vec3& P, swe::BoundaryKind kind, const Vec2& n) {
  Vec3 out = P;
  if (kind == swe::BoundaryKind::Shore) {
    const double rn = P[1] * n.x() + P[2] * n.y();
    out[1] -= 2 * rn * n.x();
    out[2] -= 2 * rn * n.y();
  } else {
    out[0] = -P[0];
  }
  return out;
}

AdjointOperator::AdjointOperator(const SweProblem& prob, TrackingTarget target)
    : prob_(&prob),
      target_(target),
      mu_v_(VectorX::Zero(prob.mesh().n_cells())),
      ct_(build_cell_tables(prob)),
      ft_(build_facet_tables(prob)),
      cd_(prob.mesh().n_cells()),
      fd_(prob.mesh().facets.size()) {}

namespace {

void physical_trace(const Eigen::MatrixXd& P, const std::vector<Eigen::Matrix2Xd>& G, int q, const double* u, int nb,
                    int nc, double phi, Vec3& U, Eigen::Matrix<double, 3, 2>& dU) {
  U.setZero();
  dU.setZero();
  for (int k = 0; k < nc; ++k)
    for (int b = 0; b < nb; ++b) {
      U[k] += u[k * nb + b] * P(q, b);
      dU.row(k) += u[k * nb + b] * G[q].col(b).transpose();
    }
  U /= phi;
  dU /= phi;
}

swe::BoundaryKind kind_of(Tag t) {
  if (t == Tag::Shore) return swe::BoundaryKind::Shore;
  if (t == Tag::OpenSea) return swe::BoundaryKind::OpenSea;
  throw MeshError("tagging error: boundary facet without Shore/OpenSea tag");
}

}  // namespace

void AdjointOperator::set_state(const VectorX& u, const VectorX& mu_v) {
  const Mesh& m = prob_->mesh();
  const DGSpace& s = prob_->space();
  const int nb = s.nb(), nc = prob_->ncomp(), nl = s.n_local();
  const double g = prob_->params().g;
  mu_v_ = mu_v.size() == m.n_cells() ? mu_v : VectorX::Zero(m.n_cells());
  Vec3 U;
  Eigen::Matrix<double, 3, 2> dU;
  for (int c = 0; c < m.n_cells(); ++c) {
    const double phi = prob_->phi()[c];
    CellData& d = cd_[c];
    const int nq = s.cell_rule().size();
    d.A.resize(nq);
    d.B.resize(nq);
    d.C.resize(nq);
    for (int q = 0; q < nq; ++q) {
      physical_trace(s.phi_q(), ct_.grad[c], q, u.data() + c * nl, nb, nc, phi, U, dU);
      if (!(U[0] > 0)) throw SolverError("dry state in cell " + std::to_string(c));
      d.A[q] = phi * adj::matrix_A<double>(U, g);
      d.B[q] = phi * adj::matrix_B<double>(U, g);
      d.C[q] = phi * adj::source_C_tilde(U, dU, ct_.grad_z[c][q], Vec2::Zero(), phi, g);
    }
  }
  for (size_t f = 0; f < m.facets.size(); ++f) {
    const Facet& fc = m.facets[f];
    FacetData& d = fd_[f];
    const int nq = static_cast<int>(ft_.w[f].size());
    const int nsides = fc.boundary() ? 1 : 2;
    d.alpha.assign(nq, 0.0);
    d.source.assign(nq, Vec3::Zero());
    for (int side = 0; side < nsides; ++side) {
      d.An[side].resize(nq);
      d.gH[side].resize(nq);
    }
    for (int q = 0; q < nq; ++q) {
      double alpha = 0, phimin = 1e300;
      for (int side = 0; side < nsides; ++side) {
        const int c = fc.cell[side];
        const double phi = prob_->phi()[c];
        const Vec2 n = side == 0 ? fc.normal : Vec2(-fc.normal);
        physical_trace(*ft_.side[f][side].phi, ft_.side[f][side].grad, q, u.data() + c * nl, nb, nc, phi, U, dU);
        if (!(U[0] > 0)) throw SolverError("dry state in cell " + std::to_string(c));
        d.An[side][q] = phi * adj::matrix_normal<double>(U, n, g);
        d.gH[side][q] = g * U[0];
        alpha = std::max(alpha, swe::max_speed<double>(U * phi, phi, n, g));
        phimin = std::min(phimin, phi);
        if (fc.boundary() && fc.tag == Tag::Shore)
          d.source[q] = -adjoint_rhs(U, ft_.side[f][0].z[q], target_);
        if (fc.boundary()) {
          kind_of(fc.tag);
        }
      }
      d.alpha[q] = fc.boundary() ? 0.0 : alpha * phimin;
    }
  }
}

VectorX AdjointOperator::mass() const {
  const DGSpace& s = prob_->space();
  VectorX m(s.ndof());
  for (int c = 0; c < n_cells(); ++c)
    m.segment(c * s.n_local(), s.n_local()).setConstant(prob_->phi()[c] * std::abs(s.det(c)));
  return m;
}

void AdjointOperator::cell_residual(int c, const double* p, double* r) const {
  const DGSpace& s = prob_->space();
  const int nb = s.nb(), nc = prob_->ncomp();
  const double phi = prob_->phi()[c], mu_f = prob_->params().mu_f;
  // momentum diffusion of the forward scheme acts on q = phi Q, so its adjoint is tested with phi w
  const Vec3 G(mu_v_[c], phi * phi * mu_f, phi * phi * mu_f);
  const CellData& d = cd_[c];
  const Eigen::MatrixXd& Pq = s.phi_q();
  for (int q = 0; q < s.cell_rule().size(); ++q) {
    const Eigen::Matrix2Xd& Gr = ct_.grad[c][q];
    Vec3 val = Vec3::Zero();
    Eigen::Matrix<double, 3, 2> grad = Eigen::Matrix<double, 3, 2>::Zero();
    for (int k = 0; k < nc; ++k)
      for (int b = 0; b < nb; ++b) {
        val[k] += p[k * nb + b] * Pq(q, b);
        grad.row(k) += p[k * nb + b] * Gr.col(b).transpose();
      }
    const Vec3 fx = d.A[q] * val, fy = d.B[q] * val, react = d.C[q] * val;
    const double w = ct_.wdet[c][q];
    for (int k = 0; k < nc; ++k) {
      const Eigen::RowVector2d flux(G[k] * grad(k, 0) - fx[k], G[k] * grad(k, 1) - fy[k]);
      for (int b = 0; b < nb; ++b) r[k * nb + b] += w * (flux.dot(Gr.col(b)) + react[k] * Pq(q, b));
    }
  }
}

void AdjointOperator::facet_residual(int f, const double* p0, const double* p1, double* r0, double* r1) const {
  const Mesh& m = prob_->mesh();
  const DGSpace& s = prob_->space();
  const Facet& fc = m.facets[f];
  const int nb = s.nb(), nc = prob_->ncomp();
  const Vec2 n = fc.normal;
  const FacetData& d = fd_[f];
  const FacetSide& sp = ft_.side[f][0];
  auto trace = [&](const FacetSide& fs, const double* p, int q, Vec3& val, Eigen::Matrix<double, 3, 2>& grad) {
    val.setZero();
    grad.setZero();
    for (int k = 0; k < nc; ++k)
      for (int b = 0; b < nb; ++b) {
        val[k] += p[k * nb + b] * (*fs.phi)(q, b);
        grad.row(k) += p[k * nb + b] * fs.grad[q].col(b).transpose();
      }
  };
  Vec3 vp, vm;
  Eigen::Matrix<double, 3, 2> gp, gm;
  const int c0 = fc.cell[0];
  const double phip = prob_->phi()[c0];
  if (!p1) {
    const auto kind = kind_of(fc.tag);
    for (int q = 0; q < static_cast<int>(ft_.w[f].size()); ++q) {
      trace(sp, p0, q, vp, gp);
      const Vec3 pb = adjoint_boundary_state(vp, kind, n);
      const Vec3 F = d.An[0][q] * (0.5 * (vp + pb)) + d.source[q];
      const double w = ft_.w[f][q];
      for (int k = 0; k < nc; ++k)
        for (int b = 0; b < nb; ++b) r0[k * nb + b] += w * F[k] * (*sp.phi)(q, b);
    }
    return;
  }
  const int c1 = fc.cell[1];
  const double phim = prob_->phi()[c1];
  const FacetSide& sm = ft_.side[f][1];
  const SweParams& par = prob_->params();
  const double sigma = par.c_ip * std::pow(std::max(1, s.degree()), 2) / std::min(s.h(c0), s.h(c1));
  const Vec3 Gp(mu_v_[c0], phip * par.mu_f, phip * par.mu_f);
  const Vec3 Gm(mu_v_[c1], phim * par.mu_f, phim * par.mu_f);
  for (int q = 0; q < static_cast<int>(ft_.w[f].size()); ++q) {
    trace(sp, p0, q, vp, gp);
    trace(sm, p1, q, vm, gm);
    const Vec3 avg = 0.5 * (vp + vm);
    const double phi_r_n = 0.5 * (phip * (vp[1] * n.x() + vp[2] * n.y()) + phim * (vm[1] * n.x() + vm[2] * n.y()));
    const double r_n = avg[1] * n.x() + avg[2] * n.y();
    Vec3 Fp, Fm;
    if (phip == phim) {
      Fp = 0.5 * (d.An[0][q] * vp - d.An[1][q] * vm) + 0.5 * d.alpha[q] * (vp - vm);
      Fm = -Fp;
    } else {
      // Across a porosity jump each side sees its own phi A_n on the averaged trace; the
      // pressure row couples through phi r, which reproduces the -gH grad(phi).r interface term.
      Fp = d.An[0][q] * avg + 0.5 * d.alpha[q] * (vp - vm);
      Fm = d.An[1][q] * avg + 0.5 * d.alpha[q] * (vm - vp);
      Fp[0] -= d.gH[0][q] * (phi_r_n - phip * r_n);
      Fm[0] += d.gH[1][q] * (phi_r_n - phim * r_n);
    }
    const double w = ft_.w[f][q];
    for (int k = 0; k < nc; ++k) {
      const double J = vp[k] - vm[k];
      const double pen = sigma * 0.5 * (Gp[k] + Gm[k]) * J;
      const double flux = 0.5 * (Gp[k] * gp.row(k).dot(n) + Gm[k] * gm.row(k).dot(n));
      const double tp = k == 0 ? 1.0 : phip, tm = k == 0 ? 1.0 : phim;
      const double ap = Fp[k] + tp * (pen - flux), am = Fm[k] - tm * (pen - flux);
      const double sym_p = 0.5 * tp * Gp[k] * J, sym_m = 0.5 * tm * Gm[k] * J;
      for (int b = 0; b < nb; ++b) {
        r0[k * nb + b] += w * (ap * (*sp.phi)(q, b) - sym_p * sp.grad[q].col(b).dot(n));
        r1[k * nb + b] += w * (am * (*sm.phi)(q, b) - sym_m * sm.grad[q].col(b).dot(n));
      }
    }
  }
}

AdjointTrajectory run_adjoint(const SweProblem& prob, const Trajectory& forward, const TrackingTarget& target) {
  const int N = forward.n_steps();
  if (N < 1 || static_cast<int>(forward.mu_v.size()) != N) throw Error("trajectory lookup failure: incomplete forward run");
  AdjointTrajectory at;
  at.states.assign(N + 1, VectorX::Zero(prob.space().ndof()));
  at.reports.resize(N + 1);
  AdjointOperator op(prob, target);
  // coefficients change every level, so each step is one fresh linear solve
  NewtonOptions opts = prob.params().newton;
  opts.lag_jacobian = false;
  ThetaStepper stepper(opts);
  VectorX next = VectorX::Zero(prob.space().ndof());
  for (int n = N; n >= 1; --n) {
    const double dt = forward.times[n] - forward.times[n - 1];
    op.set_state(forward.states[n], forward.mu_v[n - 1]);
    VectorX cur;
    StepReport rep = stepper.step(op, next, dt, prob.params().theta, cur);
    if (!rep.converged) {
      std::ostringstream os;
      os << "solver error: adjoint step did not converge at t=" << forward.times[n];
      throw SolverError(os.str());
    }
    at.reports[n] = rep;
    at.states[n] = cur;
    next = cur;
  }
  return at;
}

}  // namespace swopt
