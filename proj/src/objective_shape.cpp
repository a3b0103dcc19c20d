#include "swopt/objective_shape.hpp"

#include <unsupported/Eigen/AutoDiff>

#include <cmath>

namespace swopt {

namespace {

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

// P1 hat values at a reference point
Eigen::Vector3d hats(int dim, const Vec2& xi) {
  if (dim == 1) return Eigen::Vector3d(1 - xi.x(), xi.x(), 0);
  return Eigen::Vector3d(1 - xi.x() - xi.y(), xi.x(), xi.y());
}

struct LoopGeometry {
  std::vector<int> verts;
  std::vector<Vec2> pts;
};

std::vector<LoopGeometry> loops(const Mesh& mesh) {
  std::vector<LoopGeometry> out;
  for (const Polyline& pl : interface_loops(mesh)) {
    LoopGeometry lg;
    lg.verts = pl.verts;
    for (int v : pl.verts) lg.pts.push_back(mesh.vertex(v));
    out.push_back(std::move(lg));
  }
  return out;
}

}  // namespace

double eval_J1(const SweProblem& prob, const Trajectory& tr, const TrackingTarget& target) {
  const Mesh& m = prob.mesh();
  const DGSpace& s = prob.space();
  const FacetTables ft = build_facet_tables(prob);
  const int nb = s.nb(), nc = prob.ncomp();
  const Eigen::Array3d w2 = target.weight.array().square();
  double J = 0;
  for (int n = 1; n <= tr.n_steps(); ++n) {
    const double dt = tr.times[n] - tr.times[n - 1];
    for (int f = 0; f < m.n_facets(); ++f) {
      if (m.facets[f].tag != Tag::Shore) continue;
      const int c = m.facets[f].cell[0];
      const FacetSide& side = ft.side[f][0];
      for (int q = 0; q < static_cast<int>(ft.w[f].size()); ++q) {
        Vec3 U = Vec3::Zero();
        for (int k = 0; k < nc; ++k) U[k] = side.phi->row(q).dot(tr.states[n].segment(s.index(c, k, 0), nb)) / prob.phi()[c];
        U[0] += side.z[q];
        J += dt * ft.w[f][q] * 0.5 * (w2 * (U - target.state).array().square()).sum();
      }
    }
  }
  return J;
}

double eval_J2(const Mesh& mesh, double nu2) { return nu2 * region_area(mesh, Region::Obstacle); }

double eval_J3(const Mesh& mesh, double nu3) { return nu3 * tagged_length(mesh, Tag::Interface); }

Eigen::VectorXd polygon_curvature(const std::vector<Vec2>& pts) {
  const int n = static_cast<int>(pts.size());
  if (n < 3) throw Error("argument error: curvature needs a closed polygon");
  Eigen::VectorXd k(n);
  for (int i = 0; i < n; ++i) {
    const Vec2 a = pts[i] - pts[(i + n - 1) % n], b = pts[(i + 1) % n] - pts[i];
    const double theta = std::atan2(cross2(a, b), a.dot(b));
    k[i] = theta / (0.5 * (a.norm() + b.norm()));
  }
  return k;
}

Eigen::VectorXd curvature_gamma3(const Mesh& mesh) {
  Eigen::VectorXd k = Eigen::VectorXd::Zero(mesh.n_vertices());
  for (const LoopGeometry& lg : loops(mesh)) {
    const Eigen::VectorXd kl = polygon_curvature(lg.pts);
    for (size_t i = 0; i < lg.verts.size(); ++i) k[lg.verts[i]] = kl[i];
  }
  return k;
}

VertexField vertex_normals_gamma3(const Mesh& mesh) {
  VertexField N = VertexField::Zero(2, mesh.n_vertices());
  for (const LoopGeometry& lg : loops(mesh)) {
    const int n = static_cast<int>(lg.pts.size());
    for (int i = 0; i < n; ++i) {
      const Vec2 a = (lg.pts[i] - lg.pts[(i + n - 1) % n]).normalized();
      const Vec2 b = (lg.pts[(i + 1) % n] - lg.pts[i]).normalized();
      const Vec2 nn = Vec2(a.y(), -a.x()) + Vec2(b.y(), -b.x());
      N.col(lg.verts[i]) = nn.normalized();
    }
  }
  return N;
}

namespace {

struct Projection {
  int facet = -1;
  double t = 0;
  double dist = 1e300;
  bool ridge = false;
};

Projection project_gamma3(const Mesh& mesh, const Vec2& x) {
  Projection best, second;
  Vec2 best_pt = Vec2::Zero();
  for (int f = 0; f < mesh.n_facets(); ++f) {
    const Facet& fc = mesh.facets[f];
    if (fc.tag != Tag::Interface) continue;
    const Vec2 a = mesh.vertex(fc.vert[0]), b = mesh.vertex(fc.vert[1]);
    const double t = std::clamp((x - a).dot(b - a) / (b - a).squaredNorm(), 0.0, 1.0);
    const Vec2 p = a + t * (b - a);
    const double d = (x - p).norm();
    if (d < best.dist) {
      if ((p - best_pt).norm() > 1e-10) second = best;
      best = {f, t, d, false};
      best_pt = p;
    } else if (d < second.dist && (p - best_pt).norm() > 1e-10) {
      second = {f, t, d, false};
    }
  }
  best.ridge = second.facet >= 0 && std::abs(second.dist - best.dist) < 1e-10;
  return best;
}

template <typename Fn>
void thickness_quadrature(const Mesh& mesh, const SignedDistance& sdf, double d_min, Fn&& fn) {
  const QuadRule fq = facet_quadrature(5);
  const QuadRule xq = gauss_legendre(4);
  for (int f = 0; f < mesh.n_facets(); ++f) {
    const Facet& fc = mesh.facets[f];
    if (fc.tag != Tag::Interface) continue;
    const Vec2 a = mesh.vertex(fc.vert[0]), b = mesh.vertex(fc.vert[1]);
    for (int q = 0; q < fq.size(); ++q) {
      const double t = fq.points[q].x();
      const Vec2 x = a + t * (b - a);
      for (int k = 0; k < xq.size(); ++k) {
        const double xi = d_min * xq.points[k].x();
        const Vec2 xm = x - xi * fc.normal;
        int cell = -1;
        const double d = sdf_value(mesh, sdf, xm, &cell);
        if (d <= 0) continue;
        fn(f, t, fq.weights[q] * fc.measure * d_min * xq.weights[k], xm, d, cell);
      }
    }
  }
}

}  // namespace

double eval_J4(const Mesh& mesh, const SignedDistance& sdf, double nu4, double d_min) {
  if (nu4 == 0) return 0;
  double J = 0;
  thickness_quadrature(mesh, sdf, d_min, [&](int, double, double w, const Vec2&, double d, int) { J += w * d * d; });
  return nu4 * J;
}

VertexField assemble_DJ2(const Mesh& mesh, double nu2) {
  VertexField G = VertexField::Zero(2, mesh.n_vertices());
  for (int c = 0; c < mesh.n_cells(); ++c) {
    if (mesh.regions[c] != Region::Obstacle) continue;
    const auto g = p1_gradients(mesh, c);
    const double a = std::abs(mesh.signed_area(c));
    for (int k = 0; k < mesh.verts_per_cell(); ++k) G.col(mesh.cells[c][k]) += nu2 * a * g.col(k);
  }
  return G;
}

VertexField assemble_DJ3(const Mesh& mesh, double nu3) {
  // kappa <V, n> lumped at the vertices; the chord form 2 sin(theta/2) of the turning angle
  // makes this the exact first variation of the polygonal perimeter
  VertexField G = VertexField::Zero(2, mesh.n_vertices());
  for (const LoopGeometry& lg : loops(mesh)) {
    const int n = static_cast<int>(lg.pts.size());
    for (int i = 0; i < n; ++i) {
      const Vec2 tin = (lg.pts[i] - lg.pts[(i + n - 1) % n]).normalized();
      const Vec2 tout = (lg.pts[(i + 1) % n] - lg.pts[i]).normalized();
      G.col(lg.verts[i]) += nu3 * (tin - tout);
    }
  }
  return G;
}

VertexField assemble_DJ4(const Mesh& mesh, const SignedDistance& sdf, double nu4, double d_min) {
  VertexField G = VertexField::Zero(2, mesh.n_vertices());
  if (nu4 == 0) return G;
  const Eigen::VectorXd kappa = curvature_gamma3(mesh);
  thickness_quadrature(mesh, sdf, d_min, [&](int f, double t, double w, const Vec2& xm, double d, int cell) {
    const Facet& fc = mesh.facets[f];
    const Vec2 n = fc.normal;
    const double kx = (1 - t) * kappa[fc.vert[0]] + t * kappa[fc.vert[1]];
    const Vec2 grad_x = 0.5 * (sdf_gradient(mesh, sdf, fc.cell[0]) + sdf_gradient(mesh, sdf, fc.cell[1]));
    const double first = kx * d * d + 2 * d * sdf_gradient(mesh, sdf, cell).dot(grad_x);
    G.col(fc.vert[0]) += nu4 * w * first * (1 - t) * n;
    G.col(fc.vert[1]) += nu4 * w * first * t * n;
    const Projection p = project_gamma3(mesh, xm);
    if (p.facet < 0 || p.ridge) return;
    const Facet& pf = mesh.facets[p.facet];
    G.col(pf.vert[0]) -= nu4 * w * 2 * d * (1 - p.t) * pf.normal;
    G.col(pf.vert[1]) -= nu4 * w * 2 * d * p.t * pf.normal;
  });
  return G;
}

std::vector<bool> gradient_support(const Mesh& mesh) {
  const int nv = mesh.n_vertices();
  std::vector<bool> g3(nv, false), outer(nv, false), keep(nv, false);
  for (const Facet& f : mesh.facets) {
    std::vector<bool>& dst = f.tag == Tag::Interface ? g3 : outer;
    if (f.tag == Tag::None) continue;
    dst[f.vert[0]] = true;
    if (f.vert[1] >= 0) dst[f.vert[1]] = true;
  }
  for (int c = 0; c < mesh.n_cells(); ++c) {
    bool touch = false;
    for (int a = 0; a < mesh.verts_per_cell(); ++a) touch = touch || g3[mesh.cells[c][a]];
    if (touch)
      for (int a = 0; a < mesh.verts_per_cell(); ++a) keep[mesh.cells[c][a]] = true;
  }
  for (int i = 0; i < nv; ++i) keep[i] = keep[i] && !outer[i];
  return keep;
}

VertexField assemble_DJ1(const SweProblem& prob, const Trajectory& tr, const AdjointTrajectory& adj,
                         const std::vector<bool>& mask) {
  using Deriv = Eigen::Matrix<double, 14, 1>;
  using AD = Eigen::AutoDiffScalar<Deriv>;
  const Mesh& m = prob.mesh();
  const DGSpace& s = prob.space();
  const int N = tr.n_steps();
  if (static_cast<int>(adj.states.size()) != N + 1) throw Error("trajectory mismatch: adjoint and forward lengths differ");
  const int nb = s.nb(), nc = prob.ncomp(), nl = s.n_local(), nvc = m.verts_per_cell();
  const double g = prob.params().g, mu_f = prob.params().mu_f;
  const QuadRule& cq = s.cell_rule();
  const CellTables ct = build_cell_tables(prob);

  std::vector<int> cells;
  for (int c = 0; c < m.n_cells(); ++c) {
    bool on = mask.empty();
    for (int a = 0; a < nvc && !on; ++a) on = mask[m.cells[c][a]];
    if (on) cells.push_back(c);
  }
  VertexField G = VertexField::Zero(2, m.n_vertices());

  // value and physical gradient of every component at quadrature point q
  auto eval = [&](const VectorX& u, int c, int q, Vec3& val, Eigen::Matrix<double, 3, 2>& grad) {
    val.setZero();
    grad.setZero();
    for (int k = 0; k < nc; ++k)
      for (int b = 0; b < nb; ++b) {
        const double coef = u[c * nl + k * nb + b];
        val[k] += coef * s.phi_q()(q, b);
        grad.row(k) += coef * ct.grad[c][q].col(b).transpose();
      }
  };

  Vec3 U, Uold, P;
  Eigen::Matrix<double, 3, 2> dU, dUold, dP;
  for (int n = 1; n <= N; ++n) {
    const double dt = tr.times[n] - tr.times[n - 1];
    const VectorX& un = tr.states[n];
    const VectorX& uo = tr.states[n - 1];
    const VectorX& pn = adj.states[n];
    const VectorX& muv = tr.mu_v[n - 1];
    for (int c : cells) {
      const double phi = prob.phi()[c], mv = muv[c];
      const auto gpsi = p1_gradients(m, c);
      for (int q = 0; q < cq.size(); ++q) {
        eval(un, c, q, U, dU);
        eval(uo, c, q, Uold, dUold);
        eval(pn, c, q, P, dP);
        U /= phi;
        dU /= phi;
        Uold /= phi;
        dUold /= phi;
        const Vec2 gz = ct.grad_z[c][q];
        // gradient entries as independent variables: H, Q1, Q2, p, r1, r2, z
        std::array<Eigen::Matrix<double, 1, 2>, 7> grads = {dU.row(0), dU.row(1), dU.row(2), dP.row(0),
                                                            dP.row(1), dP.row(2), gz.transpose()};
        std::array<std::array<AD, 2>, 7> d;
        for (int f = 0; f < 7; ++f)
          for (int a = 0; a < 2; ++a) d[f][a] = AD(grads[f](a), Deriv::Unit(2 * f + a));
        const double H = U[0];
        const std::array<double, 2> Q = {U[1], U[2]};
        const std::array<double, 2> r = {P[1], P[2]};
        AD l = (phi * (H - Uold[0]) / dt + phi * (d[1][0] + d[2][1])) * P[0];
        l += mv * ((d[0][0] + d[6][0]) * d[3][0] + (d[0][1] + d[6][1]) * d[3][1]);
        for (int i = 0; i < 2; ++i) {
          AD mom = phi * (Q[i] - Uold[1 + i]) / dt + g * phi * H * d[0][i];
          for (int j = 0; j < 2; ++j)
            mom += phi * ((Q[j] * d[1 + i][j] + Q[i] * d[1 + j][j]) / H - Q[i] * Q[j] * d[0][j] / (H * H));
          l += mom * r[i];
          l += phi * phi * mu_f * (d[1 + i][0] * d[4 + i][0] + d[1 + i][1] * d[4 + i][1]);
          l += g * phi * H * d[6][i] * r[i];
        }
        Mat2 T = l.value() * Mat2::Identity();
        for (int f = 0; f < 7; ++f)
          for (int dd = 0; dd < 2; ++dd)
            for (int a = 0; a < 2; ++a) T(dd, a) -= grads[f](dd) * l.derivatives()[2 * f + a];
        const double w = dt * ct.wdet[c][q];
        for (int a = 0; a < nvc; ++a) G.col(m.cells[c][a]) += w * T * gpsi.col(a);
        if (n == 1) {
          // the initial surface is spatial data, so it carries a material derivative
          Vec2 rhs = P[0] * (dUold.row(0).transpose() + gz);
          rhs += P[1] * dUold.row(1).transpose() + P[2] * dUold.row(2).transpose();
          const Eigen::Vector3d psi = hats(m.dim, cq.points[q]);
          for (int a = 0; a < nvc; ++a) G.col(m.cells[c][a]) -= ct.wdet[c][q] * phi * psi[a] * rhs;
        }
      }
    }
  }
  return G;
}

ShapeGradient total_shape_derivative(const SweProblem& prob, const Trajectory& tr, const AdjointTrajectory& adj,
                                     const SignedDistance& sdf, const ObjectiveWeights& w) {
  const Mesh& m = prob.mesh();
  const std::vector<bool> keep = gradient_support(m);
  ShapeGradient out;
  out.dj1 = assemble_DJ1(prob, tr, adj, keep);
  out.dj2 = assemble_DJ2(m, w.nu2);
  out.dj3 = assemble_DJ3(m, w.nu3);
  out.dj4 = assemble_DJ4(m, sdf, w.nu4, w.d_min);
  for (VertexField* f : {&out.dj1, &out.dj2, &out.dj3, &out.dj4})
    for (int i = 0; i < m.n_vertices(); ++i)
      if (!keep[i]) f->col(i).setZero();
  out.total = out.dj1 + out.dj2 + out.dj3 + out.dj4;
  return out;
}

}  // namespace swopt
