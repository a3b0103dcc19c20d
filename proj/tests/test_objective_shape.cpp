#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "swopt/objective_shape.hpp"

#include <cmath>

using namespace swopt;

namespace {

const Vec2 kCenter(2.5, 0.5);
const double kRadius = 0.25;

const Mesh& circle_mesh() {
  static const Mesh m = build_half_circle(2.5, kCenter, kRadius, 0.2);
  return m;
}

SweProblem scenario_problem(const Mesh& m) {
  SweProblem p(m, 1);
  p.set_porosity(1.0, 0.4);
  p.set_sediment([](const Vec2& x) { return 0.5 - 0.25 * x.y(); });
  return p;
}

Trajectory constant_trajectory(const SweProblem& p, const VectorX& u, int n, double dt) {
  Trajectory tr;
  for (int k = 0; k <= n; ++k) {
    tr.times.push_back(k * dt);
    tr.states.push_back(u);
    if (k < n) tr.mu_v.push_back(VectorX::Zero(p.mesh().n_cells()));
  }
  return tr;
}

AdjointTrajectory zero_adjoint(const SweProblem& p, int n) {
  AdjointTrajectory a;
  a.states.assign(n + 1, VectorX::Zero(p.space().ndof()));
  a.reports.resize(n + 1);
  return a;
}

// structured rectangle [0,2]x[0,1] with an obstacle strip of the given width centered on y = 0.5
Mesh strip_mesh(double width) {
  std::vector<double> xs, ys;
  for (int i = 0; i <= 20; ++i) xs.push_back(0.1 * i);
  for (int j = 0; j <= 4; ++j) ys.push_back(0.1 * j);
  for (double y : {0.5 - width / 2, 0.5, 0.5 + width / 2}) ys.push_back(y);
  for (int j = 6; j <= 10; ++j) ys.push_back(0.1 * j);
  std::sort(ys.begin(), ys.end());
  ys.erase(std::unique(ys.begin(), ys.end(), [](double a, double b) { return std::abs(a - b) < 1e-12; }), ys.end());
  const int nx = static_cast<int>(xs.size()), ny = static_cast<int>(ys.size());
  Mesh m;
  m.vertices.resize(2, nx * ny);
  auto id = [&](int i, int j) { return j * nx + i; };
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) m.vertices.col(id(i, j)) = Vec2(xs[i], ys[j]);
  for (int j = 0; j + 1 < ny; ++j)
    for (int i = 0; i + 1 < nx; ++i) {
      const int a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
      const double ym = 0.5 * (ys[j] + ys[j + 1]), xm = 0.5 * (xs[i] + xs[i + 1]);
      const Region r = (std::abs(ym - 0.5) < width / 2 && xm > 0.5 && xm < 1.5) ? Region::Obstacle : Region::OmegaTilde;
      m.cells.push_back({a, b, c});
      m.cells.push_back({a, c, d});
      m.regions.push_back(r);
      m.regions.push_back(r);
    }
  BoundaryTagMap tags;
  auto add = [&](int u, int v) {
    tags.keys.push_back({std::min(u, v), std::max(u, v)});
    tags.tags.push_back(Tag::Shore);
  };
  for (int i = 0; i + 1 < nx; ++i) {
    add(id(i, 0), id(i + 1, 0));
    add(id(i, ny - 1), id(i + 1, ny - 1));
  }
  for (int j = 0; j + 1 < ny; ++j) {
    add(id(0, j), id(0, j + 1));
    add(id(nx - 1, j), id(nx - 1, j + 1));
  }
  build_facets(m, tags);
  return m;
}

std::vector<Vec2> regular_polygon(int n, double R) {
  std::vector<Vec2> p;
  for (int k = 0; k < n; ++k) p.emplace_back(R * std::cos(2 * M_PI * k / n), R * std::sin(2 * M_PI * k / n));
  return p;
}

}  // namespace

TEST_CASE("eval_J1") {
  const Mesh m = build_half_circle(2.5, kCenter, kRadius, 0.5);
  const SweProblem p = scenario_problem(m);
  const TrackingTarget t;
  SUBCASE("forward state meets the target") {
    CHECK(eval_J1(p, constant_trajectory(p, p.lake_at_rest(1.0), 10, 0.01), t) <= 1e-28);
  }
  SUBCASE("constant misfit on the shore") {
    const double mis = 0.2, T = 0.1;
    const double J = eval_J1(p, constant_trajectory(p, p.lake_at_rest(1.0 + mis), 10, T / 10), t);
    const double L = tagged_length(m, Tag::Shore);
    CHECK(J == doctest::Approx(0.5 * mis * mis * L * T).epsilon(1e-12));
  }
  SUBCASE("first order in dt") {
    const VectorX u0 = p.initial_state(
        [](const Vec2& x) { return Vec3(1 + 0.2 * std::exp(-10 * (x - Vec2(2.5, 0.3)).squaredNorm()), 0, 0); });
    std::vector<double> J;
    for (double dt : {8e-3, 4e-3, 2e-3}) J.push_back(eval_J1(p, run_forward(p, u0, 0.2, dt), t));
    const double ratio = (J[0] - J[1]) / (J[1] - J[2]);
    MESSAGE("J1 Richardson ratio " << ratio);
    CHECK(ratio > 1.5);
    CHECK(ratio < 2.5);
  }
}

TEST_CASE("area and perimeter penalties") {
  const Mesh& m = circle_mesh();
  const double area = M_PI * kRadius * kRadius, perim = 2 * M_PI * kRadius;
  CHECK(std::abs(eval_J2(m, 1e-4) - 1e-4 * area) <= 0.01 * 1e-4 * area);
  CHECK(std::abs(eval_J3(m, 1e-4) - 1e-4 * perim) <= 0.01 * 1e-4 * perim);
  CHECK(eval_J2(m, 1e-4) == doctest::Approx(1e-4 * region_area(m, Region::Obstacle)).epsilon(1e-14));
  CHECK(eval_J3(m, 1e-4) == doctest::Approx(1e-4 * tagged_length(m, Tag::Interface)).epsilon(1e-14));
  CHECK(eval_J2(m, 0) == 0.0);
  CHECK(eval_J3(m, 0) == 0.0);
}

TEST_CASE("solve_eikonal") {
  SUBCASE("interval with both ends fixed") {
    const Mesh l = build_interval(50, 1.0);
    const SignedDistance d = solve_eikonal(l, {}, {0, 50});
    double err = 0;
    for (int i = 0; i < l.n_vertices(); ++i) {
      const double x = l.vertex(i).x();
      err = std::max(err, std::abs(d.w[i] - std::min(x, 1 - x)));
    }
    // viscous smoothing is confined to the ridge
    CHECK(err <= 2 * d.viscosity);
  }
  SUBCASE("circle obstacle") {
    const Mesh& m = circle_mesh();
    const SignedDistance d = solve_eikonal(m);
    const auto loops = interface_loops(m);
    REQUIRE(loops.size() == 1);
    for (int v : loops[0].verts) CHECK(std::abs(d.w[v]) <= 1e-8);
    double hmax = 0, err = 0;
    for (int c = 0; c < m.n_cells(); ++c) hmax = std::max(hmax, m.diameter(c));
    for (int i = 0; i < m.n_vertices(); ++i)
      err = std::max(err, std::abs(d.w[i] - ((m.vertex(i) - kCenter).norm() - kRadius)));
    MESSAGE("circle distance error " << err << " with h " << hmax << ", viscosity " << d.viscosity);
    CHECK(err <= hmax + d.viscosity);
    // sign convention
    for (int c = 0; c < m.n_cells(); ++c) {
      const double w = sdf_value(m, d, m.centroid(c));
      if ((m.centroid(c) - kCenter).norm() < kRadius - 0.05) CHECK(w < 0);
      if ((m.centroid(c) - kCenter).norm() > kRadius + 0.05) CHECK(w > 0);
    }
  }
  SUBCASE("unit gradient away from the interface") {
    const Mesh& m = circle_mesh();
    const SignedDistance d = solve_eikonal(m);
    double l2 = 0;
    for (int c = 0; c < m.n_cells(); ++c) {
      const double dist = std::abs((m.centroid(c) - kCenter).norm() - kRadius);
      if (dist <= 3 * m.diameter(c)) continue;
      const double e = sdf_gradient(m, d, c).norm() - 1;
      l2 += e * e * m.area(c);
    }
    MESSAGE("L2 norm of |grad w| - 1: " << std::sqrt(l2) << " (viscosity " << d.viscosity << ")");
    CHECK(std::sqrt(l2) <= 0.1);
  }
}

TEST_CASE("thickness penalty") {
  const double d_min = 0.1;
  SUBCASE("thick circle") {
    const Mesh& m = circle_mesh();
    const SignedDistance d = solve_eikonal(m);
    CHECK(eval_J4(m, d, 1e-2, d_min) == 0.0);
    CHECK(eval_J4(m, d, 0.0, d_min) == 0.0);
    CHECK(assemble_DJ4(m, d, 1e-2, d_min).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("thin strips") {
    const Mesh thick = strip_mesh(0.3), half = strip_mesh(d_min / 2), thin = strip_mesh(0.03);
    const double j_thick = eval_J4(thick, solve_eikonal(thick), 1.0, d_min);
    const double j_half = eval_J4(half, solve_eikonal(half), 1.0, d_min);
    const double j_thin = eval_J4(thin, solve_eikonal(thin), 1.0, d_min);
    MESSAGE("J4 strips: " << j_thick << " " << j_half << " " << j_thin);
    CHECK(j_thick == 0.0);
    CHECK(j_half > 0);
    CHECK(j_thin > j_half);
  }
}

TEST_CASE("curvature") {
  for (int n : {64, 128, 256}) {
    const double R = 0.7;
    const Eigen::VectorXd k = polygon_curvature(regular_polygon(n, R));
    for (int i = 0; i < n; ++i) CHECK(std::abs(k[i] - 1 / R) <= 0.05 / R);
  }
  {
    // square with edge midpoints: the midpoints are straight
    std::vector<Vec2> sq{{0, 0}, {0.5, 0}, {1, 0}, {1, 0.5}, {1, 1}, {0.5, 1}, {0, 1}, {0, 0.5}};
    const Eigen::VectorXd k = polygon_curvature(sq);
    for (int i = 1; i < 8; i += 2) CHECK(std::abs(k[i]) <= 1e-14);
    for (int i = 0; i < 8; i += 2) CHECK(k[i] > 0);
    std::reverse(sq.begin(), sq.end());
    const Eigen::VectorXd r = polygon_curvature(sq);
    for (int i = 0; i < 8; ++i) CHECK(r[i] == doctest::Approx(-k[7 - i]).epsilon(1e-14));
  }
  {
    const Mesh& m = circle_mesh();
    const Eigen::VectorXd k = curvature_gamma3(m);
    const auto loops = interface_loops(m);
    for (int v : loops[0].verts) CHECK(std::abs(k[v] - 1 / kRadius) <= 0.05 / kRadius);
  }
}

TEST_CASE("penalty shape derivatives") {
  const Mesh& m = circle_mesh();
  SUBCASE("dilation") {
    VertexField V(2, m.n_vertices());
    for (int i = 0; i < m.n_vertices(); ++i) V.col(i) = m.vertex(i) - kCenter;
    const double nu2 = 1e-4;
    CHECK(apply(assemble_DJ2(m, nu2), V) ==
          doctest::Approx(2 * nu2 * region_area(m, Region::Obstacle)).epsilon(1e-12));
  }
  SUBCASE("field away from the obstacle") {
    VertexField V = VertexField::Zero(2, m.n_vertices());
    for (int i = 0; i < m.n_vertices(); ++i)
      if ((m.vertex(i) - kCenter).norm() > 1.0) V.col(i) = Vec2(0.3, -0.8);
    const SignedDistance d = solve_eikonal(m);
    CHECK(apply(assemble_DJ2(m, 1e-4), V) == 0.0);
    CHECK(apply(assemble_DJ3(m, 1e-4), V) == 0.0);
    CHECK(apply(assemble_DJ4(m, d, 1e-2, 0.7), V) == 0.0);
  }
  SUBCASE("normal inflation gives the total curvature") {
    const VertexField V = vertex_normals_gamma3(m);
    const double nu3 = 1e-4;
    CHECK(std::abs(apply(assemble_DJ3(m, nu3), V) - nu3 * 2 * M_PI) <= 0.05 * nu3 * 2 * M_PI);
  }
}

TEST_CASE("DJ1") {
  const Mesh m = build_half_circle(2.5, kCenter, kRadius, 0.3);
  const SweProblem p = scenario_problem(m);
  const std::vector<bool> keep = gradient_support(m);
  VertexField V = VertexField::Zero(2, m.n_vertices());
  for (int i = 0; i < m.n_vertices(); ++i)
    if (keep[i]) V.col(i) = Vec2(std::sin(3 * m.vertex(i).x()), std::cos(2 * m.vertex(i).y() + m.vertex(i).x()));
  auto surface = [](const Vec2& x) { return Vec3(1 + 0.2 * std::exp(-10 * (x - Vec2(2.5, 0.8)).squaredNorm()), 0, 0); };
  const double T = 0.2, dt = 4e-3;
  const Trajectory tr = run_forward(p, p.initial_state(surface), T, dt);
  const TrackingTarget tg;

  SUBCASE("zero field and zero adjoint") {
    const AdjointTrajectory a = run_adjoint(p, tr, tg);
    CHECK(apply(assemble_DJ1(p, tr, a, keep), VertexField::Zero(2, m.n_vertices())) == 0.0);
    CHECK(assemble_DJ1(p, tr, zero_adjoint(p, tr.n_steps()), keep).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("steady lake: J1 does not depend on the obstacle") {
    TrackingTarget off;
    off.state[0] = 1.2;
    const Trajectory rest = run_forward(p, p.lake_at_rest(1.0), T, dt);
    const AdjointTrajectory a = run_adjoint(p, rest, off);
    double pmax = 0;
    for (const VectorX& s : a.states) pmax = std::max(pmax, s.cwiseAbs().maxCoeff());
    REQUIRE(pmax > 1e-3);
    CHECK(std::abs(apply(assemble_DJ1(p, rest, a, keep), V)) <= 1e-12);
  }
  SUBCASE("finite differences of J1 on displaced meshes") {
    const AdjointTrajectory a = run_adjoint(p, tr, tg);
    const double dj = apply(assemble_DJ1(p, tr, a, keep), V);
    auto J = [&](double eps) {
      const Mesh me = apply_displacement(m, V, eps);
      SweProblem q(me, 1);
      q.set_porosity(p.phi());
      q.set_sediment_coeffs(p.z());
      return eval_J1(q, run_forward(q, q.initial_state(surface), T, dt), tg);
    };
    std::vector<double> rel;
    for (double eps : {1e-3, 1e-4}) {
      const double fd = (J(eps) - J(-eps)) / (2 * eps);
      rel.push_back(std::abs(dj - fd) / std::abs(fd));
    }
    MESSAGE("DJ1 relative error: eps 1e-3 " << rel[0] << ", eps 1e-4 " << rel[1]);
    CHECK(rel[1] <= 2e-2);
    CHECK(rel[1] <= rel[0]);
  }
}

TEST_CASE("total shape derivative") {
  const Mesh m = build_half_circle(2.5, kCenter, kRadius, 0.3);
  const SweProblem p = scenario_problem(m);
  const Trajectory tr = run_forward(
      p, p.initial_state([](const Vec2& x) { return Vec3(1 + 0.2 * std::exp(-10 * (x - Vec2(2.5, 0.8)).squaredNorm()), 0, 0); }),
      0.1, 4e-3);
  const AdjointTrajectory a = run_adjoint(p, tr, TrackingTarget{});
  const SignedDistance d = solve_eikonal(m);
  const std::vector<bool> keep = gradient_support(m);

  SUBCASE("zero weights and zero adjoint") {
    ObjectiveWeights w;
    w.nu2 = w.nu3 = w.nu4 = 0;
    CHECK(total_shape_derivative(p, tr, zero_adjoint(p, tr.n_steps()), d, w).total.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("entries away from the interface are zero") {
    const ShapeGradient G = total_shape_derivative(p, tr, a, d, ObjectiveWeights{});
    int nonzero = 0;
    for (int i = 0; i < m.n_vertices(); ++i) {
      if (!keep[i]) CHECK(G.total.col(i).norm() == 0.0);
      else nonzero += G.total.col(i).norm() > 0;
    }
    CHECK(nonzero > 0);
  }
  SUBCASE("penalty part is linear in the weights") {
    ObjectiveWeights w1, w2;
    w1.d_min = w2.d_min = 0.7;  // make the thickness term active
    w2.nu2 = 2 * w1.nu2;
    w2.nu3 = 2 * w1.nu3;
    w2.nu4 = 2 * w1.nu4;
    const ShapeGradient g1 = total_shape_derivative(p, tr, a, d, w1), g2 = total_shape_derivative(p, tr, a, d, w2);
    const VertexField pen1 = g1.total - g1.dj1, pen2 = g2.total - g2.dj1;
    REQUIRE(g1.dj4.cwiseAbs().maxCoeff() > 0);
    CHECK((pen2 - 2 * pen1).cwiseAbs().maxCoeff() <= 1e-14 * pen1.cwiseAbs().maxCoeff());
    CHECK((g2.dj1 - g1.dj1).cwiseAbs().maxCoeff() == 0.0);
  }
}
