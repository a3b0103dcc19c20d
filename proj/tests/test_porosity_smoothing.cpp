#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "swopt/porosity_smoothing.hpp"

using namespace swopt;

namespace {

SmoothedPorosity params(double alpha = 0.01) { return {alpha, 0.038, 0.18, 0.4}; }

// independent oracle from the piecewise definition, left zone only
double psi_left(double x, double x0, double a) {
  if (x <= x0 - a) return 1;
  if (x >= x0 + a) return 0;
  const double s = (x0 - x) / a;
  return -0.25 * s * s * s + 0.75 * s + 0.5;
}

}  // namespace

TEST_CASE("psi and phi_alpha examples") {
  const SmoothedPorosity p = params();
  CHECK(eval_psi(p.x0, p) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(eval_phi_alpha(p.x0, p) == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(eval_psi(p.x1, p) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(eval_psi(p.x0 - p.alpha, p) == 1.0);
  CHECK(eval_phi_alpha(p.x0 - p.alpha, p) == 1.0);
  CHECK(eval_psi(0.1, p) == 0.0);
  CHECK(eval_phi_alpha(0.1, p) == p.phi2);

  for (double x : {0.0, 0.03, 0.035, 0.04, 0.045, 0.05})
    CHECK(eval_psi(x, p) == doctest::Approx(psi_left(x, p.x0, p.alpha)).epsilon(1e-14));
  // right zone mirrors the left one
  for (double t : {0.1, 0.3, 0.5, 0.9})
    CHECK(eval_psi(p.x1 + t * p.alpha, p) == doctest::Approx(eval_psi(p.x0 - t * p.alpha, p)).epsilon(1e-14));
}

TEST_CASE("exact branch values") {
  const SmoothedPorosity p = params(0.02);
  for (int i = 0; i <= 1000; ++i) {
    const double x = i * 1e-3;
    const double v = eval_psi(x, p);
    if (x <= p.x0 - p.alpha || x >= p.x1 + p.alpha) CHECK(v == 1.0);
    if (x >= p.x0 + p.alpha && x <= p.x1 - p.alpha) CHECK(v == 0.0);
  }
}

TEST_CASE("continuity, C1 seams and monotonicity") {
  const SmoothedPorosity p = params(0.02);
  const double d = 1e-4;
  // zero slope at every seam: one-sided differences are bounded by max|phi''| d^2 / 2
  const double bound = 0.75 * (1 - p.phi2) / (p.alpha * p.alpha) * d * d * (1 + 1e-6);
  for (double s : {p.x0 - p.alpha, p.x0 + p.alpha, p.x1 - p.alpha, p.x1 + p.alpha}) {
    CHECK(std::abs(eval_phi_alpha(s + d, p) - eval_phi_alpha(s, p)) <= bound);
    CHECK(std::abs(eval_phi_alpha(s, p) - eval_phi_alpha(s - d, p)) <= bound);
  }
  const int n = 2000;
  double prev = eval_phi_alpha(p.x0 - p.alpha, p);
  for (int i = 1; i <= n; ++i) {
    const double x = p.x0 - p.alpha + 2 * p.alpha * i / n;
    const double v = eval_phi_alpha(x, p);
    CHECK(v <= prev);
    prev = v;
  }
  prev = eval_phi_alpha(p.x1 - p.alpha, p);
  for (int i = 1; i <= n; ++i) {
    const double x = p.x1 - p.alpha + 2 * p.alpha * i / n;
    const double v = eval_phi_alpha(x, p);
    CHECK(v >= prev);
    prev = v;
  }

  // range and location of the largest deviation from the sharp profile
  double worst = 0, at = 0;
  for (int i = 0; i <= 100000; ++i) {
    const double x = i * 1e-5;
    const double v = eval_phi_alpha(x, p);
    CHECK(v >= p.phi2);
    CHECK(v <= 1.0);
    const double e = std::abs(v - eval_phi_sharp(x, p));
    if (e > worst) {
      worst = e;
      at = x;
    }
  }
  CHECK((std::abs(at - p.x0) < p.alpha || std::abs(at - p.x1) < p.alpha));
}

TEST_CASE("invalid parameters") {
  CHECK_THROWS_AS(params(0).validate(), Error);
  CHECK_THROWS_AS(params(-0.01).validate(), Error);
  CHECK_THROWS_AS(params(0.071).validate(), Error);
  CHECK_NOTHROW(params(0.07).validate());
  SmoothedPorosity p = params();
  p.phi2 = 0;
  CHECK_THROWS_AS(p.validate(), Error);
  p.phi2 = 1.2;
  CHECK_THROWS_AS(p.validate(), Error);
  p = params();
  p.x1 = p.x0;
  CHECK_THROWS_AS(p.validate(), Error);
}

TEST_CASE("self comparison gives zero") {
  const Mesh m = build_interval(100, 1.0);
  SweProblem prob(m, 1, SweParams{});
  const SmoothedPorosity p = params();
  std::vector<double> phi(m.n_cells());
  for (int c = 0; c < m.n_cells(); ++c) phi[c] = eval_phi_sharp(m.centroid(c).x(), p);
  prob.set_porosity(phi);
  const Trajectory t = run_forward(
      prob, prob.initial_state([](const Vec2& x) { return Vec3(1 + 0.3 * std::exp(-100 * (x.x() - 0.5) * (x.x() - 0.5)), 0, 0); }),
      0.05, 1e-3);
  const ErrorNorms e = error_norms(prob, t, prob, t);
  CHECK(e.E_H == 0.0);
  CHECK(e.E_uH == 0.0);
  CHECK(e.E_H_cell == 0.0);
  CHECK(e.E_uH_cell == 0.0);
}

TEST_CASE("coarse study decreases and does not depend on the thread count") {
  SmoothingStudyConfig cfg;
  cfg.n_cells = 200;
  cfg.T = 0.1;
  const std::vector<double> alphas{0.06, 0.03, 0.01};
  const std::vector<SmoothingRow> a = run_convergence_study(alphas, cfg, 1);
  REQUIRE(a.size() == alphas.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    MESSAGE("alpha " << a[k].alpha << " E_H " << a[k].norms.E_H << " E_uH " << a[k].norms.E_uH);
    CHECK(a[k].alpha == alphas[k]);
    CHECK(a[k].norms.E_H >= 0);
    if (k > 0) {
      CHECK(a[k].norms.E_H < a[k - 1].norms.E_H);
      CHECK(a[k].norms.E_uH < a[k - 1].norms.E_uH);
    }
  }
  const std::vector<SmoothingRow> b = run_convergence_study(alphas, cfg, 2);
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].norms.E_H == b[k].norms.E_H);
    CHECK(a[k].norms.E_uH == b[k].norms.E_uH);
  }
  CHECK_THROWS_AS(run_convergence_study({0.08}, cfg), Error);
}
