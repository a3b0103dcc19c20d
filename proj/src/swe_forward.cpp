#include "swopt/swe_forward.hpp"

#include <cmath>
#include <sstream>

namespace swopt {

namespace {

constexpr double kPi = 3.14159265358979323846;

swe::BoundaryKind boundary_kind(Tag t, int facet) {
  if (t == Tag::Shore) return swe::BoundaryKind::Shore;
  if (t == Tag::OpenSea) return swe::BoundaryKind::OpenSea;
  throw MeshError("tagging error: boundary facet " + std::to_string(facet) + " has no Shore/OpenSea tag");
}

[[noreturn]] void dry(int cell) {
  throw SolverError("dry state in cell " + std::to_string(cell));
}

}  // namespace

double ShockParams::threshold(int degree) const {
  return std::isnan(s0) ? -4.0 * std::log10(degree + 1.0) : s0;
}

SweProblem::SweProblem(const Mesh& mesh, int degree, SweParams params)
    : mesh_(&mesh),
      space_(mesh, degree, mesh.dim + 1),
      zspace_(mesh, degree, 1),
      params_(params),
      phi_(mesh.n_cells(), 1.0),
      z_(VectorX::Zero(zspace_.ndof())) {}

void SweProblem::set_porosity(double phi_omega, double phi_obstacle) {
  for (int c = 0; c < mesh_->n_cells(); ++c) phi_[c] = mesh_->regions[c] == Region::Obstacle ? phi_obstacle : phi_omega;
}

void SweProblem::set_porosity(std::vector<double> per_cell) {
  if (static_cast<int>(per_cell.size()) != mesh_->n_cells()) throw Error("argument error: porosity size mismatch");
  for (double p : per_cell)
    if (!(p > 0 && p <= 1)) throw Error("argument error: porosity outside (0,1]");
  phi_ = std::move(per_cell);
}

void SweProblem::set_sediment(const std::function<double(const Vec2&)>& z) {
  DGField f(zspace_);
  project(f, [&](const Vec2& x) {
    Eigen::VectorXd v(1);
    v[0] = z(x);
    return v;
  });
  z_ = f.coeffs;
}

void SweProblem::set_sediment_coeffs(VectorX coeffs) {
  if (coeffs.size() != zspace_.ndof()) throw Error("argument error: sediment size mismatch");
  z_ = std::move(coeffs);
}

double SweProblem::z_at(int c, const Vec2& xi) const {
  const int nb = zspace_.nb();
  return zspace_.basis().eval_all(xi).dot(z_.segment(c * nb, nb));
}

Vec2 SweProblem::grad_z_at(int c, const Vec2& xi) const {
  const int nb = zspace_.nb();
  return zspace_.inv_jt(c) * (zspace_.basis().grad_all(xi) * z_.segment(c * nb, nb));
}

VectorX SweProblem::initial_state(const std::function<Vec3(const Vec2&)>& surface_state) const {
  const QuadRule& q = space_.cell_rule();
  const int nb = space_.nb(), nc = ncomp();
  VectorX u = VectorX::Zero(space_.ndof());
  for (int c = 0; c < mesh_->n_cells(); ++c) {
    for (int k = 0; k < q.size(); ++k) {
      const Vec3 s = surface_state(space_.cell_point(c, k));
      const double z = z_at(c, q.points[k]);
      const Vec3 uh(phi_[c] * (s[0] - z), phi_[c] * s[1], phi_[c] * s[2]);
      for (int comp = 0; comp < nc; ++comp)
        for (int b = 0; b < nb; ++b) u[space_.index(c, comp, b)] += q.weights[k] * space_.phi_q()(k, b) * uh[comp];
    }
  }
  return u;
}

VectorX SweProblem::lake_at_rest(double level) const {
  return initial_state([level](const Vec2&) { return Vec3(level, 0, 0); });
}

VectorX shock_indicator(const SweProblem& prob, const VectorX& u) {
  const DGSpace& s = prob.space();
  const int nb = s.nb(), lo = s.basis().size_below(s.degree());
  VectorX out(prob.mesh().n_cells());
  for (int c = 0; c < prob.mesh().n_cells(); ++c) {
    const auto h = u.segment(s.index(c, 0, 0), nb);
    const double total = h.squaredNorm();
    const double top = h.tail(nb - lo).squaredNorm();
    out[c] = (total > 0 && top > 0) ? std::log10(top / total) : -std::numeric_limits<double>::infinity();
  }
  return out;
}

VectorX shock_viscosity(const SweProblem& prob, const VectorX& u) {
  const int p = prob.degree();
  VectorX mu = VectorX::Zero(prob.mesh().n_cells());
  const ShockParams& sp = prob.params().shock;
  if (!sp.enabled || p < 1) return mu;
  const double s0 = sp.threshold(p);
  const VectorX s = shock_indicator(prob, u);
  for (int c = 0; c < mu.size(); ++c) {
    double ramp = 0;
    if (s[c] > s0 + sp.kappa) {
      ramp = 1;
    } else if (s[c] >= s0 - sp.kappa) {
      ramp = 0.5 * (1 + std::sin(kPi * (s[c] - s0) / (2 * sp.kappa)));
    }
    mu[c] = sp.mu_max * prob.space().h(c) / p * ramp;
  }
  return mu;
}

CellTables build_cell_tables(const SweProblem& prob) {
  const DGSpace& s = prob.space();
  const QuadRule& q = s.cell_rule();
  const int nc = prob.mesh().n_cells();
  CellTables t;
  t.grad.resize(nc);
  t.wdet.resize(nc);
  t.z.resize(nc);
  t.grad_z.resize(nc);
  for (int c = 0; c < nc; ++c) {
    for (int k = 0; k < q.size(); ++k) {
      t.grad[c].push_back(s.inv_jt(c) * s.dphi_q()[k]);
      t.wdet[c].push_back(q.weights[k] * std::abs(s.det(c)));
      t.z[c].push_back(prob.z_at(c, q.points[k]));
      t.grad_z[c].push_back(prob.grad_z_at(c, q.points[k]));
    }
  }
  return t;
}

FacetTables build_facet_tables(const SweProblem& prob) {
  const DGSpace& s = prob.space();
  const Mesh& m = prob.mesh();
  const QuadRule& fq = s.facet_rule();
  FacetTables t;
  t.side.resize(m.facets.size());
  t.w.resize(m.facets.size());
  for (size_t f = 0; f < m.facets.size(); ++f) {
    const Facet& fc = m.facets[f];
    for (int k = 0; k < fq.size(); ++k) t.w[f].push_back(m.dim == 1 ? 1.0 : fq.weights[k] * fc.measure);
    for (int side = 0; side < (fc.boundary() ? 1 : 2); ++side) {
      const int c = fc.cell[side], loc = fc.local[side];
      const bool flip = side == 1;
      FacetSide& fs = t.side[f][side];
      fs.phi = &s.phi_f(loc, flip);
      for (int k = 0; k < fq.size(); ++k) {
        const Vec2 xi = s.ref_facet_point(loc, flip, k);
        fs.grad.push_back(s.inv_jt(c) * s.dphi_f(loc, flip)[k]);
        fs.z.push_back(prob.z_at(c, xi));
        fs.grad_z.push_back(prob.grad_z_at(c, xi));
      }
    }
  }
  return t;
}

SweOperator::SweOperator(const SweProblem& prob, VectorX mu_v)
    : prob_(&prob), mu_v_(std::move(mu_v)), ct_(build_cell_tables(prob)), ft_(build_facet_tables(prob)) {
  if (mu_v_.size() != prob.mesh().n_cells()) mu_v_ = VectorX::Zero(prob.mesh().n_cells());
}

VectorX SweOperator::mass() const {
  const DGSpace& s = prob_->space();
  VectorX m(s.ndof());
  for (int c = 0; c < n_cells(); ++c) m.segment(c * s.n_local(), s.n_local()).setConstant(std::abs(s.det(c)));
  return m;
}

void SweOperator::cell_residual(int c, const double* u, double* r) const {
  const DGSpace& s = prob_->space();
  const int nb = s.nb(), nc = prob_->ncomp();
  const double g = prob_->params().g, mu_f = prob_->params().mu_f;
  const double phi = prob_->phi()[c], muv = mu_v_[c];
  const Eigen::MatrixXd& P = s.phi_q();
  for (int q = 0; q < s.cell_rule().size(); ++q) {
    const Eigen::Matrix2Xd& G = ct_.grad[c][q];
    Vec3 val = Vec3::Zero();
    Eigen::Matrix<double, 3, 2> grad = Eigen::Matrix<double, 3, 2>::Zero();
    for (int k = 0; k < nc; ++k)
      for (int b = 0; b < nb; ++b) {
        val[k] += u[k * nb + b] * P(q, b);
        grad.row(k) += u[k * nb + b] * G.col(b).transpose();
      }
    if (!(val[0] > 0)) dry(c);
    const auto F = swe::advective_flux<double>(val, phi, g);
    const Vec3 S = swe::sources<double>(val, phi, Vec2::Zero(), ct_.grad_z[c][q], g);
    Eigen::Matrix<double, 3, 2> D;
    D.row(0) = muv * (grad.row(0) / phi + ct_.grad_z[c][q].transpose());
    D.row(1) = phi * mu_f * grad.row(1);
    D.row(2) = phi * mu_f * grad.row(2);
    const double w = ct_.wdet[c][q];
    for (int k = 0; k < nc; ++k) {
      const Eigen::RowVector2d flux = D.row(k) - F.row(k);
      for (int b = 0; b < nb; ++b) r[k * nb + b] += w * (flux.dot(G.col(b)) - S[k] * P(q, b));
    }
  }
}

void SweOperator::facet_residual(int f, const double* u0, const double* u1, double* r0, double* r1) const {
  const Mesh& m = prob_->mesh();
  const DGSpace& s = prob_->space();
  const Facet& fc = m.facets[f];
  const int nb = s.nb(), nc = prob_->ncomp();
  const SweParams& par = prob_->params();
  const double g = par.g;
  const Vec2 n = fc.normal;
  const int c0 = fc.cell[0];
  const double phip = prob_->phi()[c0];
  const FacetSide& sp = ft_.side[f][0];
  auto trace = [&](const FacetSide& fs, const double* u, int q, Vec3& val, Eigen::Matrix<double, 3, 2>& grad) {
    val.setZero();
    grad.setZero();
    for (int k = 0; k < nc; ++k)
      for (int b = 0; b < nb; ++b) {
        val[k] += u[k * nb + b] * (*fs.phi)(q, b);
        grad.row(k) += u[k * nb + b] * fs.grad[q].col(b).transpose();
      }
  };
  Vec3 vp, vm;
  Eigen::Matrix<double, 3, 2> gp, gm;
  if (!u1) {
    const auto kind = boundary_kind(fc.tag, f);
    for (int q = 0; q < static_cast<int>(ft_.w[f].size()); ++q) {
      trace(sp, u0, q, vp, gp);
      if (!(vp[0] > 0)) dry(c0);
      const Vec3 ub = swe::boundary_state<double>(vp, kind, n, par.boundary, phip, sp.z[q]);
      const Vec3 F = swe::boundary_flux<double>(vp, ub, phip, n, g);
      const double w = ft_.w[f][q];
      for (int k = 0; k < nc; ++k)
        for (int b = 0; b < nb; ++b) r0[k * nb + b] += w * F[k] * (*sp.phi)(q, b);
    }
    return;
  }
  const int c1 = fc.cell[1];
  const double phim = prob_->phi()[c1];
  const FacetSide& sm = ft_.side[f][1];
  const double sigma = par.c_ip * std::pow(std::max(1, s.degree()), 2) / std::min(s.h(c0), s.h(c1));
  const Vec3 Gp(mu_v_[c0], phip * par.mu_f, phip * par.mu_f);
  const Vec3 Gm(mu_v_[c1], phim * par.mu_f, phim * par.mu_f);
  for (int q = 0; q < static_cast<int>(ft_.w[f].size()); ++q) {
    trace(sp, u0, q, vp, gp);
    trace(sm, u1, q, vm, gm);
    if (!(vp[0] > 0)) dry(c0);
    if (!(vm[0] > 0)) dry(c1);
    Vec3 fp, fm;
    swe::well_balanced_facet_flux<double>(vp, vm, sp.z[q], sm.z[q], phip, phim, n, g, fp, fm);
    // diffusion acts on (H + z, q): the surface and the solver momentum, both continuous at rest
    // and across porosity jumps
    Vec3 Up = vp, Um = vm;
    Up[0] = vp[0] / phip + sp.z[q];
    Um[0] = vm[0] / phim + sm.z[q];
    Eigen::Matrix<double, 3, 2> dUp = gp, dUm = gm;
    dUp.row(0) = gp.row(0) / phip + sp.grad_z[q].transpose();
    dUm.row(0) = gm.row(0) / phim + sm.grad_z[q].transpose();
    const double w = ft_.w[f][q];
    for (int k = 0; k < nc; ++k) {
      const double J = Up[k] - Um[k];
      const double pen = sigma * 0.5 * (Gp[k] + Gm[k]) * J;
      const double avg = 0.5 * (Gp[k] * dUp.row(k).dot(n) + Gm[k] * dUm.row(k).dot(n));
      const double ap = fp[k] + pen - avg, am = fm[k] - pen + avg;
      const double sym_p = 0.5 * Gp[k] * J, sym_m = 0.5 * Gm[k] * J;
      for (int b = 0; b < nb; ++b) {
        r0[k * nb + b] += w * (ap * (*sp.phi)(q, b) - sym_p * sp.grad[q].col(b).dot(n));
        r1[k * nb + b] += w * (am * (*sm.phi)(q, b) - sym_m * sm.grad[q].col(b).dot(n));
      }
    }
  }
}

VectorX swe_residual(const SweProblem& prob, const VectorX& u, const VectorX& mu_v) {
  SweOperator op(prob, mu_v);
  return assemble_residual(op, u);
}

Trajectory run_forward(const SweProblem& prob, const VectorX& u0, double T, double dt, const StepObserver& observer) {
  if (!(T > 0) || !(dt > 0)) throw Error("argument error: T and dt must be positive");
  const int N = static_cast<int>(std::llround(T / dt));
  if (N < 1 || std::abs(N * dt - T) > 1e-9 * T) throw Error("argument error: dt must divide T");
  Trajectory tr;
  tr.times.push_back(0.0);
  tr.states.push_back(u0);
  SweOperator op(prob, VectorX::Zero(prob.mesh().n_cells()));
  ThetaStepper stepper(prob.params().newton);
  if (observer) observer(0, 0.0, u0);
  VectorX u = u0, next;
  for (int n = 0; n < N; ++n) {
    const double t = (n + 1) * dt;
    op.set_mu_v(shock_viscosity(prob, u));
    StepReport rep;
    try {
      rep = stepper.step(op, u, dt, prob.params().theta, next);
    } catch (const SolverError& e) {
      std::ostringstream os;
      os << e.what() << " (step to t=" << t << ")";
      throw SolverError(os.str());
    }
    if (!rep.converged) {
      std::ostringstream os;
      os << "solver error: Newton did not converge at t=" << t << " (residual " << rep.residual << ")";
      throw SolverError(os.str());
    }
    tr.mu_v.push_back(op.mu_v());
    tr.reports.push_back(rep);
    u = next;
    tr.times.push_back(t);
    tr.states.push_back(u);
    if (observer) observer(n + 1, t, u);
  }
  return tr;
}

Diagnostics diagnostics(const SweProblem& prob, const VectorX& u) {
  const DGSpace& s = prob.space();
  const QuadRule& q = s.cell_rule();
  const int nb = s.nb(), nc = prob.ncomp();
  const double g = prob.params().g;
  Diagnostics d;
  for (int c = 0; c < prob.mesh().n_cells(); ++c) {
    const double phi = prob.phi()[c], J = std::abs(s.det(c));
    for (int k = 0; k < q.size(); ++k) {
      Vec3 v = Vec3::Zero();
      for (int comp = 0; comp < nc; ++comp) v[comp] = s.phi_q().row(k).dot(u.segment(s.index(c, comp, 0), nb));
      const double w = q.weights[k] * J;
      const double eta = v[0] / phi + prob.z_at(c, q.points[k]);
      const double q2 = v[1] * v[1] + v[2] * v[2];
      d.mass += w * v[0];
      d.energy += w * (0.5 * q2 / v[0] + 0.5 * g * phi * eta * eta);
      d.max_speed = std::max(d.max_speed, std::sqrt(q2) / v[0]);
    }
  }
  return d;
}

Eigen::MatrixXd vertex_values(const SweProblem& prob, const VectorX& u) {
  const Mesh& m = prob.mesh();
  const DGSpace& s = prob.space();
  const int nb = s.nb(), nc = prob.ncomp(), nv = m.dim == 1 ? 2 : 3;
  const Vec2 ref[3] = {Vec2(0, 0), Vec2(1, 0), Vec2(0, 1)};
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m.n_vertices(), 3);
  Eigen::VectorXd cnt = Eigen::VectorXd::Zero(m.n_vertices());
  for (int c = 0; c < m.n_cells(); ++c) {
    const double phi = prob.phi()[c];
    for (int a = 0; a < nv; ++a) {
      const Eigen::VectorXd bv = s.basis().eval_all(ref[a]);
      Vec3 v = Vec3::Zero();
      for (int comp = 0; comp < nc; ++comp) v[comp] = bv.dot(u.segment(s.index(c, comp, 0), nb));
      const int vid = m.cells[c][a];
      out(vid, 0) += v[0] / phi;
      out(vid, 1) += v[1] / v[0];
      out(vid, 2) += v[2] / v[0];
      cnt[vid] += 1;
    }
  }
  for (int i = 0; i < m.n_vertices(); ++i)
    if (cnt[i] > 0) out.row(i) /= cnt[i];
  return out;
}

}  // namespace swopt
