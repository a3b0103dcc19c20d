#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "swopt/objective_shape.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>

using namespace swopt;

namespace {

const double g = 9.81;

std::vector<double> sorted_eigs(const Mat3& M) {
  Eigen::EigenSolver<Mat3> es(M);
  std::vector<double> v;
  for (int i = 0; i < 3; ++i) v.push_back(es.eigenvalues()[i].real());
  std::sort(v.begin(), v.end());
  return v;
}

// a trajectory of given states with no shock viscosity
Trajectory fixed_trajectory(const SweProblem& p, const std::vector<VectorX>& states, double dt) {
  Trajectory tr;
  for (std::size_t n = 0; n < states.size(); ++n) {
    tr.times.push_back(n * dt);
    tr.states.push_back(states[n]);
    if (n + 1 < states.size()) tr.mu_v.push_back(VectorX::Zero(p.mesh().n_cells()));
  }
  return tr;
}

double max_abs(const VectorX& v) { return v.cwiseAbs().maxCoeff(); }

double max_over(const AdjointTrajectory& a) {
  double m = 0;
  for (const VectorX& p : a.states) m = std::max(m, max_abs(p));
  return m;
}

Mesh coarse_half_circle() { return build_half_circle(2.5, Vec2(2.5, 0.5), 0.25, 0.5); }

SweProblem sloped_problem(const Mesh& m) {
  SweProblem p(m, 1);
  p.set_porosity(1.0, 0.4);
  p.set_sediment([](const Vec2& x) { return 0.5 - 0.25 * x.y(); });
  return p;
}

VectorX gaussian(const SweProblem& p, Vec2 c, double amp) {
  return p.initial_state([=](const Vec2& x) { return Vec3(1 + amp * std::exp(-10 * (x - c).squaredNorm()), 0, 0); });
}

}  // namespace

TEST_CASE("adjoint matrices at rest") {
  const Mat3 A = adj::matrix_A<double>(Vec3(1, 0, 0), g);
  CHECK(A(0, 0) == 0.0);
  CHECK(A(0, 1) == doctest::Approx(-9.81).epsilon(1e-15));
  CHECK(A(0, 2) == 0.0);
  CHECK(A(1, 0) == -1.0);
  CHECK(A.bottomRightCorner(2, 2).norm() == 0.0);
  CHECK(A(2, 0) == 0.0);
}

TEST_CASE("adjoint spectrum matches the forward wave speeds") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  double worst = 0;
  for (int k = 0; k < 1000; ++k) {
    const double phi = 0.2 + 0.8 * u(rng);
    const Vec3 U(0.1 + 1.9 * u(rng), 2 * u(rng) - 1, 2 * u(rng) - 1);
    const double th = 2 * M_PI * u(rng);
    const Vec2 n(std::cos(th), std::sin(th));
    // A and B carry the minus sign of the backward-in-time system
    const std::vector<double> e = sorted_eigs(-adj::matrix_normal<double>(U, n, g).transpose());
    const Vec3 w = swe::wave_speeds(Vec3(phi * U), phi, n, g);
    std::vector<double> ws{w[0], w[1], w[2]};
    std::sort(ws.begin(), ws.end());
    for (int i = 0; i < 3; ++i) worst = std::max(worst, std::abs(e[i] - ws[i]));
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("B is A with the coordinates swapped") {
  Mat3 S = Mat3::Zero();
  S(0, 0) = 1;
  S(1, 2) = 1;
  S(2, 1) = 1;
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  for (int k = 0; k < 100; ++k) {
    const Vec3 U(0.1 + u(rng), u(rng) - 0.5, u(rng) - 0.5);
    const Mat3 B = adj::matrix_B<double>(U, g);
    const Mat3 A = adj::matrix_A<double>(Vec3(S * U), g);
    CHECK((B - S * A * S).cwiseAbs().maxCoeff() <= 1e-15);
  }
}

TEST_CASE("source matrix C") {
  const Vec3 U(0.8, 0.1, -0.2);
  CHECK(adj::source_C(U, Vec2::Zero(), Vec2::Zero(), 0.7, g).norm() == 0.0);
  const Mat3 C = adj::source_C(U, Vec2(0, -0.25), Vec2::Zero(), 1.0, g);
  CHECK(C(0, 2) == doctest::Approx(-0.25 * g).epsilon(1e-15));
  CHECK(C(0, 1) == 0.0);
  Mat3 rest = C;
  rest(0, 2) = 0;
  CHECK(rest.norm() == 0.0);
  // porosity part in y: -g H / phi dphi/dy
  const Mat3 Cp = adj::source_C(U, Vec2::Zero(), Vec2(0, 0.5), 0.4, g);
  CHECK(Cp(0, 2) == doctest::Approx(-g * 0.8 / 0.4 * 0.5).epsilon(1e-15));
}

TEST_CASE("adjoint_rhs") {
  TrackingTarget t;
  CHECK(adjoint_rhs(Vec3(0.8, 0, 0), 0.2, t).norm() <= 1e-15);
  const Vec3 s = adjoint_rhs(Vec3(1.0, 0, 0), 0.2, t);
  CHECK(s[0] == doctest::Approx(-0.2).epsilon(1e-14));
  CHECK(s[1] == 0.0);
  const Vec3 m = adjoint_rhs(Vec3(1.0, 0.3, -0.1), 0.0, t);
  CHECK(m[1] == doctest::Approx(-0.3).epsilon(1e-15));
  CHECK(m[2] == doctest::Approx(0.1).epsilon(1e-15));
  t.weight = Vec3::Zero();
  CHECK(adjoint_rhs(Vec3(1.0, 0.3, -0.1), 0.7, t).norm() == 0.0);
}

TEST_CASE("adjoint_boundary_state") {
  const Vec2 n(0.6, 0.8);
  const Vec3 p(0.3, n.x(), n.y());
  const Vec3 r = adjoint_boundary_state(p, swe::BoundaryKind::Shore, n);
  CHECK(r[0] == 0.3);
  CHECK((r.tail<2>() + n).norm() <= 1e-15);
  const Vec3 t(0.3, -n.y(), n.x());
  CHECK((adjoint_boundary_state(t, swe::BoundaryKind::Shore, n) - t).norm() <= 1e-15);
  // open sea with Q = 0: the mean of p and its ghost vanishes
  const Vec3 o = adjoint_boundary_state(Vec3(0.7, 0.2, 0.1), swe::BoundaryKind::OpenSea, n);
  CHECK(0.5 * (0.7 + o[0]) == 0.0);
}

TEST_CASE("adjoint residual") {
  const Mesh m = coarse_half_circle();
  SUBCASE("zero adjoint against a matching forward state") {
    SweProblem p(m, 1);
    p.set_sediment([](const Vec2& x) { return 0.5 - 0.25 * x.y(); });
    AdjointOperator op(p, TrackingTarget{});
    op.set_state(p.lake_at_rest(1.0), VectorX::Zero(m.n_cells()));
    CHECK(max_abs(assemble_residual(op, VectorX::Zero(p.space().ndof()))) <= 1e-14);
  }
  SUBCASE("constant adjoint over a rest state only sees the bed source") {
    SweProblem p = sloped_problem(m);
    p.set_porosity(1.0, 1.0);
    AdjointOperator op(p, TrackingTarget{});
    op.set_state(p.lake_at_rest(1.0), VectorX::Zero(m.n_cells()));
    const Vec3 P(0.3, -0.7, 0.5);
    const DGSpace& s = p.space();
    // constant mode only
    VectorX Pc = VectorX::Zero(s.ndof());
    const double v0 = s.basis().eval(0, Vec2(0.3, 0.3));
    for (int c = 0; c < m.n_cells(); ++c)
      for (int k = 0; k < 3; ++k) Pc[s.index(c, k, 0)] = P[k] / v0;
    const VectorX r = assemble_residual(op, Pc);
    // C P with C(0,2) = g dz/dy, tested against the basis
    const double cp = g * -0.25 * P[2];
    double ratio_min = 1e300, ratio_max = -1e300;
    int checked = 0;
    for (int c = 0; c < m.n_cells(); ++c) {
      bool boundary = false;
      for (int k = 0; k < 3; ++k) boundary = boundary || m.facets[m.cell_facets[c][k]].boundary();
      if (boundary) continue;
      Eigen::VectorXd mean = Eigen::VectorXd::Zero(s.nb());
      for (int q = 0; q < s.cell_rule().size(); ++q)
        mean += s.cell_rule().weights[q] * s.basis().eval_all(s.cell_rule().points[q]);
      mean *= std::abs(s.det(c));
      const Eigen::VectorXd expect = cp * mean;
      for (int b = 0; b < s.nb(); ++b) {
        CHECK(std::abs(r[s.index(c, 1, b)]) <= 1e-12);
        CHECK(std::abs(r[s.index(c, 2, b)]) <= 1e-12);
        if (std::abs(expect[b]) > 1e-12) {
          const double ratio = r[s.index(c, 0, b)] / expect[b];
          ratio_min = std::min(ratio_min, ratio);
          ratio_max = std::max(ratio_max, ratio);
        } else {
          CHECK(std::abs(r[s.index(c, 0, b)]) <= 1e-12);
        }
      }
      ++checked;
    }
    REQUIRE(checked > 0);
    // one consistent sign convention, unit magnitude
    CHECK(std::abs(ratio_max - ratio_min) <= 1e-10);
    CHECK(std::abs(std::abs(ratio_max) - 1.0) <= 1e-10);
  }
}

TEST_CASE("run_adjoint homogeneity and linearity") {
  const Mesh m = coarse_half_circle();
  SweProblem p = sloped_problem(m);
  SUBCASE("forward state meets the target") {
    const Trajectory tr = fixed_trajectory(p, std::vector<VectorX>(26, p.lake_at_rest(1.0)), 4e-3);
    CHECK(max_over(run_adjoint(p, tr, TrackingTarget{})) == 0.0);
  }
  const Trajectory tr = run_forward(p, gaussian(p, Vec2(2.5, 0.5), 0.3), 0.1, 4e-3);
  SUBCASE("zero weights") {
    TrackingTarget t;
    t.weight = Vec3::Zero();
    CHECK(max_over(run_adjoint(p, tr, t)) == 0.0);
  }
  SUBCASE("doubling the forcing doubles P") {
    TrackingTarget t1, t2;
    t2.weight = std::sqrt(2.0) * t1.weight;
    const AdjointTrajectory a = run_adjoint(p, tr, t1), b = run_adjoint(p, tr, t2);
    const double scale = max_over(a);
    REQUIRE(scale > 0);
    double worst = 0;
    for (std::size_t n = 0; n < a.states.size(); ++n) worst = std::max(worst, max_abs(b.states[n] - 2 * a.states[n]));
    CHECK(worst <= 1e-12 * scale);
  }
  SUBCASE("affine in the target") {
    TrackingTarget t0, t1, t2;
    t1.state = t0.state + Vec3(0.05, 0.01, -0.02);
    t2.state = t0.state + 2 * Vec3(0.05, 0.01, -0.02);
    const AdjointTrajectory a0 = run_adjoint(p, tr, t0), a1 = run_adjoint(p, tr, t1), a2 = run_adjoint(p, tr, t2);
    const double scale = max_over(a1);
    double worst = 0;
    for (std::size_t n = 0; n < a0.states.size(); ++n)
      worst = std::max(worst, max_abs((a2.states[n] - a0.states[n]) - 2 * (a1.states[n] - a0.states[n])));
    CHECK(worst <= 1e-12 * scale);
  }
}

TEST_CASE("adjoint support stays inside the backward domain of dependence") {
  const double hmesh = 0.3;
  const Mesh m = build_half_circle(2.5, Vec2(2.5, 0.5), 0.25, hmesh);
  SweProblem p(m, 1);
  p.set_sediment([](const Vec2&) { return 0.0; });
  const Vec2 x0(1.0, 0.0);
  const double r = 0.4, dt = 4e-3;
  const int N = 50, K = 5;  // misfit only in the last K steps
  const VectorX rest = p.lake_at_rest(1.0);
  const VectorX bump = p.initial_state([&](const Vec2& x) {
    const double s = (x - x0).squaredNorm() / (r * r);
    return Vec3(1 + 0.1 * std::pow(std::max(0.0, 1 - s), 2), 0, 0);
  });
  std::vector<VectorX> states;
  for (int n = 0; n <= N; ++n) states.push_back(n > N - K ? bump : rest);
  const AdjointTrajectory a = run_adjoint(p, fixed_trajectory(p, states, dt), TrackingTarget{});
  const double cmax = std::sqrt(g * 1.1);
  const int nl = p.space().n_local();
  double worst = 0;
  for (int n = 1; n <= N; ++n) {
    const double tau = (N - n + K) * dt;
    double inside = 0, outside = 0;
    for (int c = 0; c < m.n_cells(); ++c) {
      const double v = a.states[n].segment(c * nl, nl).cwiseAbs().maxCoeff();
      // two cells of slack for the projection of the misfit
      if ((m.centroid(c) - x0).norm() > r + cmax * tau + 2 * hmesh) outside = std::max(outside, v);
      else inside = std::max(inside, v);
    }
    if (inside > 0) worst = std::max(worst, outside / inside);
  }
  CHECK(worst <= 1e-8);
}

TEST_CASE("duality with a perturbed initial condition") {
  auto duality_error = [](double h) {
    const Mesh m = build_half_circle(2.5, Vec2(2.5, 0.5), 0.25, h);
    SweProblem p = sloped_problem(m);
    const Vec2 c0(2.0, 0.6);
    auto ic = [&](double eps) {
      return p.initial_state([&](const Vec2& x) {
        return Vec3(1 + 0.2 * std::exp(-10 * (x - Vec2(2.5, 0.5)).squaredNorm()) +
                        eps * std::exp(-20 * (x - c0).squaredNorm()),
                    0, 0);
      });
    };
    const TrackingTarget tg;
    const double T = 0.2, dt = 4e-3, eps = 1e-3;
    const Trajectory tr = run_forward(p, ic(0), T, dt);
    const AdjointTrajectory at = run_adjoint(p, tr, tg);
    const DGSpace& s = p.space();
    VectorX M(s.ndof());
    for (int c = 0; c < m.n_cells(); ++c) M.segment(c * s.n_local(), s.n_local()).setConstant(std::abs(s.det(c)));
    const VectorX du = (ic(eps) - ic(-eps)) / (2 * eps);
    const double predicted = -M.cwiseProduct(at.states[1]).dot(du);
    const double fd =
        (eval_J1(p, run_forward(p, ic(eps), T, dt), tg) - eval_J1(p, run_forward(p, ic(-eps), T, dt), tg)) / (2 * eps);
    return std::abs(predicted - fd) / std::abs(fd);
  };
  const double coarse = duality_error(0.3), fine = duality_error(0.2);
  MESSAGE("relative duality gap: h=0.3 " << coarse << ", h=0.2 " << fine);
  CHECK(coarse <= 1e-6);
  CHECK(fine <= 1e-6);
  CHECK(fine < coarse);
}
