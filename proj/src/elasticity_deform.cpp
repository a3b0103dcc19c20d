#include "swopt/elasticity.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

namespace swopt {

namespace {

std::vector<char> outer_vertices(const Mesh& mesh) {
  std::vector<char> on(mesh.n_vertices(), 0);
  for (const Facet& f : mesh.facets)
    if (f.boundary()) {
      on[f.vert[0]] = 1;
      if (f.vert[1] >= 0) on[f.vert[1]] = 1;
    }
  return on;
}

// condensed index for unconstrained dofs, -1 for fixed ones
std::vector<int> free_numbering(const std::vector<char>& fixed, int& n_free) {
  std::vector<int> id(fixed.size(), -1);
  n_free = 0;
  for (size_t i = 0; i < fixed.size(); ++i)
    if (!fixed[i]) id[i] = n_free++;
  return id;
}

Eigen::VectorXd cg_solve(const SparseMatrix& A, const Eigen::VectorXd& b, double tol, const char* what) {
  if (b.size() == 0 || b.norm() == 0) return Eigen::VectorXd::Zero(b.size());
  Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cg;
  cg.setTolerance(tol);
  cg.setMaxIterations(std::max<int>(1000, 10 * static_cast<int>(b.size())));
  cg.compute(A);
  if (cg.info() != Eigen::Success) throw SolverError(std::string("solver error: ") + what + " matrix is singular");
  Eigen::VectorXd x = cg.solve(b);
  if (cg.info() != Eigen::Success)
    throw SolverError(std::string("solver error: ") + what + " CG did not converge (residual " +
                      std::to_string(cg.error()) + ")");
  return x;
}

}  // namespace

Eigen::VectorXd solve_harmonic(const Mesh& mesh, const std::vector<int>& fixed, const std::vector<double>& values) {
  const int nv = mesh.n_vertices(), k = mesh.verts_per_cell();
  if (fixed.size() != values.size() || fixed.empty()) throw Error("argument error: harmonic solve needs Dirichlet data");
  Eigen::VectorXd u = Eigen::VectorXd::Zero(nv);
  std::vector<char> is_fixed(nv, 0);
  for (size_t i = 0; i < fixed.size(); ++i) {
    is_fixed[fixed[i]] = 1;
    u[fixed[i]] = values[i];
  }
  int nf = 0;
  const std::vector<int> id = free_numbering(is_fixed, nf);
  std::vector<Triplet> t;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(nf);
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const auto G = p1_gradients(mesh, c);
    const double vol = std::abs(mesh.signed_area(c));
    if (!(vol > 0)) throw SolverError("solver error: degenerate cell in harmonic solve");
    for (int a = 0; a < k; ++a) {
      const int i = id[mesh.cells[c][a]];
      if (i < 0) continue;
      for (int bb = 0; bb < k; ++bb) {
        const int vj = mesh.cells[c][bb];
        const double kij = vol * G.col(a).dot(G.col(bb));
        if (id[vj] >= 0)
          t.emplace_back(i, id[vj], kij);
        else
          b[i] -= kij * u[vj];
      }
    }
  }
  SparseMatrix A(nf, nf);
  A.setFromTriplets(t.begin(), t.end());
  // direct solve keeps the discrete maximum principle at roundoff level
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(A);
  if (ldlt.info() != Eigen::Success) throw SolverError("solver error: singular harmonic system");
  const Eigen::VectorXd x = ldlt.solve(b);
  for (int i = 0; i < nv; ++i)
    if (id[i] >= 0) u[i] = x[id[i]];
  return u;
}

LameField solve_lame_mu(const Mesh& mesh, double mu_min, double mu_max, double lambda) {
  if (!(mu_min > 0) || mu_max < mu_min) throw Error("argument error: need mu_max >= mu_min > 0");
  std::vector<int> fixed;
  std::vector<double> values;
  std::vector<char> seen(mesh.n_vertices(), 0);
  auto add = [&](int v, double val) {
    if (v < 0 || seen[v]) return;
    seen[v] = 1;
    fixed.push_back(v);
    values.push_back(val);
  };
  // Gamma3 first so vertices shared with the outer boundary keep mu_max
  for (const Facet& f : mesh.facets)
    if (f.tag == Tag::Interface) {
      add(f.vert[0], mu_max);
      add(f.vert[1], mu_max);
    }
  for (const Facet& f : mesh.facets)
    if (f.boundary()) {
      add(f.vert[0], mu_min);
      add(f.vert[1], mu_min);
    }
  LameField out;
  out.lambda = lambda;
  out.mu = solve_harmonic(mesh, fixed, values);
  return out;
}

SparseMatrix elasticity_matrix(const Mesh& mesh, const LameField& lame) {
  if (mesh.dim != 2) throw Error("argument error: elasticity needs a 2D mesh");
  const int nv = mesh.n_vertices();
  std::vector<Triplet> t;
  t.reserve(36 * mesh.n_cells());
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const auto G = p1_gradients(mesh, c);
    const double vol = std::abs(mesh.signed_area(c));
    double mu = 0;
    for (int a = 0; a < 3; ++a) mu += lame.mu[mesh.cells[c][a]] / 3.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b) {
            double v = mu * G(b, i) * G(a, j) + lame.lambda * G(a, i) * G(b, j);
            if (a == b) v += mu * G.col(i).dot(G.col(j));
            t.emplace_back(2 * mesh.cells[c][i] + a, 2 * mesh.cells[c][j] + b, vol * v);
          }
  }
  SparseMatrix K(2 * nv, 2 * nv);
  K.setFromTriplets(t.begin(), t.end());
  return K;
}

double elastic_energy(const Mesh& mesh, const LameField& lame, const Displacement& W) {
  const SparseMatrix K = elasticity_matrix(mesh, lame);
  const Eigen::Map<const Eigen::VectorXd> w(W.data(), W.size());
  return w.dot(K * w);
}

Displacement solve_elasticity(const Mesh& mesh, const LameField& lame, const Eigen::Matrix2Xd& rhs, double tol) {
  const int nv = mesh.n_vertices();
  if (rhs.cols() != nv || lame.mu.size() != nv) throw Error("argument error: elasticity data size mismatch");
  const std::vector<char> outer = outer_vertices(mesh);
  std::vector<char> fixed(2 * nv, 0);
  for (int i = 0; i < nv; ++i) fixed[2 * i] = fixed[2 * i + 1] = outer[i];
  int nf = 0;
  const std::vector<int> id = free_numbering(fixed, nf);
  const SparseMatrix K = elasticity_matrix(mesh, lame);
  std::vector<Triplet> t;
  for (int col = 0; col < K.outerSize(); ++col)
    for (SparseMatrix::InnerIterator it(K, col); it; ++it)
      if (id[it.row()] >= 0 && id[it.col()] >= 0) t.emplace_back(id[it.row()], id[it.col()], it.value());
  SparseMatrix A(nf, nf);
  A.setFromTriplets(t.begin(), t.end());
  Eigen::VectorXd b(nf);
  for (int i = 0; i < 2 * nv; ++i)
    if (id[i] >= 0) b[id[i]] = rhs(i % 2, i / 2);
  const Eigen::VectorXd x = cg_solve(A, b, tol, "elasticity");
  Displacement W = Displacement::Zero(2, nv);
  for (int i = 0; i < 2 * nv; ++i)
    if (id[i] >= 0) W(i % 2, i / 2) = x[id[i]];
  return W;
}

}  // namespace swopt
