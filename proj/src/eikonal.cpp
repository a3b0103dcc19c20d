#include "swopt/objective_shape.hpp"

#include <atomic>
#include <iostream>

namespace swopt {

namespace {

std::vector<int> gamma3_vertices(const Mesh& mesh) {
  std::vector<char> on(mesh.n_vertices(), 0);
  for (const Facet& f : mesh.facets)
    if (f.tag == Tag::Interface) {
      on[f.vert[0]] = 1;
      if (f.vert[1] >= 0) on[f.vert[1]] = 1;
    }
  std::vector<int> out;
  for (int i = 0; i < mesh.n_vertices(); ++i)
    if (on[i]) out.push_back(i);
  return out;
}

}  // namespace

SignedDistance solve_eikonal(const Mesh& mesh, const EikonalOptions& opts, std::vector<int> zero_set) {
  if (zero_set.empty()) zero_set = gamma3_vertices(mesh);
  if (zero_set.empty()) throw Error("argument error: eikonal solve needs a nonempty zero set");
  const int nv = mesh.n_vertices(), nc = mesh.n_cells(), k = mesh.verts_per_cell();
  double mu = opts.viscosity;
  if (std::isnan(mu)) {
    mu = 0;
    for (int c = 0; c < nc; ++c) mu = std::max(mu, mesh.diameter(c));
  }
  const double d2 = opts.regularization * opts.regularization;
  std::vector<char> fixed(nv, 0);
  for (int i : zero_set) fixed[i] = 1;
  std::vector<Eigen::Matrix<double, 2, 3>> G(nc);
  std::vector<double> vol(nc);
  for (int c = 0; c < nc; ++c) {
    G[c] = p1_gradients(mesh, c);
    vol[c] = std::abs(mesh.signed_area(c));
  }

  auto residual = [&](const Eigen::VectorXd& w) {
    Eigen::VectorXd r = Eigen::VectorXd::Zero(nv);
    for (int c = 0; c < nc; ++c) {
      Vec2 g = Vec2::Zero();
      for (int a = 0; a < k; ++a) g += w[mesh.cells[c][a]] * G[c].col(a);
      const double s = std::sqrt(g.squaredNorm() + d2) - 1.0;
      for (int a = 0; a < k; ++a) r[mesh.cells[c][a]] += vol[c] * (s / k + mu * G[c].col(a).dot(g));
    }
    for (int i = 0; i < nv; ++i)
      if (fixed[i]) r[i] = w[i];
    return r;
  };
  auto jacobian = [&](const Eigen::VectorXd& w) {
    std::vector<Triplet> t;
    for (int c = 0; c < nc; ++c) {
      Vec2 g = Vec2::Zero();
      for (int a = 0; a < k; ++a) g += w[mesh.cells[c][a]] * G[c].col(a);
      const double s = std::sqrt(g.squaredNorm() + d2);
      for (int a = 0; a < k; ++a) {
        const int i = mesh.cells[c][a];
        if (fixed[i]) continue;
        for (int b = 0; b < k; ++b)
          t.emplace_back(i, mesh.cells[c][b],
                         vol[c] * (g.dot(G[c].col(b)) / (s * k) + mu * G[c].col(a).dot(G[c].col(b))));
      }
    }
    for (int i = 0; i < nv; ++i)
      if (fixed[i]) t.emplace_back(i, i, 1.0);
    SparseMatrix J(nv, nv);
    J.setFromTriplets(t.begin(), t.end());
    return J;
  };

  SignedDistance out;
  out.viscosity = mu;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(nv);
  Eigen::VectorXd r = residual(w);
  double rn = r.norm();
  const double scale = std::max(1.0, rn);
  Eigen::SparseLU<SparseMatrix> lu;
  int it = 0;
  for (; it < opts.max_iter && rn > opts.tol * scale; ++it) {
    lu.compute(jacobian(w));
    if (lu.info() != Eigen::Success) throw SolverError("solver error: eikonal Jacobian is singular");
    const Eigen::VectorXd dw = lu.solve(-r);
    double lam = 1.0;
    bool ok = false;
    for (int ls = 0; ls < 30; ++ls, lam *= 0.5) {
      const Eigen::VectorXd wt = w + lam * dw;
      const Eigen::VectorXd rt = residual(wt);
      if (rt.norm() < (1 - 1e-4 * lam) * rn) {
        w = wt;
        r = rt;
        rn = rt.norm();
        ok = true;
        break;
      }
    }
    if (!ok) break;
  }
  if (rn > opts.tol * scale * 1e3) throw SolverError("solver error: eikonal Newton did not converge");
  out.iterations = it;

  // sign by region: negative strictly inside D
  std::vector<char> in_obstacle(nv, 1), touched(nv, 0);
  for (int c = 0; c < nc; ++c)
    for (int a = 0; a < k; ++a) {
      const int i = mesh.cells[c][a];
      touched[i] = 1;
      if (mesh.regions[c] != Region::Obstacle) in_obstacle[i] = 0;
    }
  out.w.resize(nv);
  for (int i = 0; i < nv; ++i) {
    if (fixed[i]) {
      out.w[i] = 0;
    } else {
      out.w[i] = (touched[i] && in_obstacle[i]) ? -std::abs(w[i]) : std::abs(w[i]);
    }
  }
  return out;
}

double sdf_value(const Mesh& mesh, const SignedDistance& d, const Vec2& x, int* cell) {
  Eigen::Vector3d bary;
  int c = locate_point(mesh, x, &bary);
  if (c < 0) {
    static std::atomic<bool> warned{false};
    if (!warned.exchange(true)) {
      std::cerr << "warning: offset point outside the mesh, clamped to the nearest cell\n";
    }
    double best = 1e300;
    for (int k = 0; k < mesh.n_cells(); ++k) {
      const double dd = (mesh.centroid(k) - x).squaredNorm();
      if (dd < best) {
        best = dd;
        c = k;
      }
    }
    bary = barycentric(mesh, c, x);
    bary = bary.cwiseMax(0.0);
    bary /= bary.sum();
  }
  if (cell) *cell = c;
  double v = 0;
  for (int a = 0; a < mesh.verts_per_cell(); ++a) v += bary[a] * d.w[mesh.cells[c][a]];
  return v;
}

Vec2 sdf_gradient(const Mesh& mesh, const SignedDistance& d, int cell) {
  const auto G = p1_gradients(mesh, cell);
  Vec2 g = Vec2::Zero();
  for (int a = 0; a < mesh.verts_per_cell(); ++a) g += d.w[mesh.cells[cell][a]] * G.col(a);
  return g;
}

}  // namespace swopt
