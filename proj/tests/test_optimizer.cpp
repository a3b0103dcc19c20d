#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "swopt/config.hpp"
#include "swopt/optimizer.hpp"

using namespace swopt;

namespace {

const Mesh& mesh() {
  static const Mesh m = build_half_circle(2.5, Vec2(2.5, 0.5), 0.25, 0.4);
  return m;
}

std::vector<int> interface_vertices(const Mesh& m) {
  const std::vector<Tag> t = m.vertex_tags();
  std::vector<int> out;
  for (int i = 0; i < m.n_vertices(); ++i)
    if (t[i] == Tag::Interface) out.push_back(i);
  return out;
}

// coarse and short run of the default scenario
RunConfig short_run() {
  RunConfig cfg;
  cfg.mesh.h = 0.5;
  cfg.discretization.T = 0.1;
  cfg.discretization.dt = 5e-3;
  cfg.optimizer.max_iterations = 2;
  return cfg;
}

}  // namespace

TEST_CASE("line search with W = 0 fails after all trials") {
  const Mesh& m = mesh();
  const Displacement W = Displacement::Zero(2, m.n_vertices());
  int calls = 0;
  const TrialObjective J = [&](const Mesh&) -> std::optional<double> {
    ++calls;
    return 1.0;
  };
  const LineSearchResult r = line_search(m, W, 1.5, 1.0, J, 0.5, 7);
  CHECK_FALSE(r.accepted);
  CHECK(r.trials == 7);
  CHECK(calls == 7);
}

TEST_CASE("descent direction is accepted on the first trial") {
  const Mesh& m = mesh();
  const std::vector<int> iv = interface_vertices(m);
  const Vec2 d(0.05, -0.02);
  // J = sum |x - x0 - d|^2 over the obstacle boundary, gradient -2d at x0
  const TrialObjective J = [&](const Mesh& t) -> std::optional<double> {
    double s = 0;
    for (int v : iv) s += (t.vertex(v) - m.vertex(v) - d).squaredNorm();
    return s;
  };
  Displacement W = Displacement::Zero(2, m.n_vertices());
  for (int v : iv) W.col(v) = -2 * d;
  const double J0 = *J(m);
  const LineSearchResult r = line_search(m, W, 0.1, J0, J, 0.5, 20);
  REQUIRE(r.accepted);
  CHECK(r.trials == 1);
  CHECK(r.step == 0.1);
  CHECK(r.J < J0);
  // the quadratic is minimal at rho = 1/2 and J(0.1) = 0.64 J0
  CHECK(r.J == doctest::Approx(0.64 * J0).epsilon(1e-12));
  CHECK(validate_mesh(r.mesh).valid());
}

TEST_CASE("step shrinks until the mesh is valid") {
  const Mesh& m = mesh();
  const std::vector<int> iv = interface_vertices(m);
  Displacement W = Displacement::Zero(2, m.n_vertices());
  for (int v : iv) W.col(v) = Vec2(-1.0, 0.0);
  // any move to the right lowers J
  const TrialObjective J = [&](const Mesh& t) -> std::optional<double> {
    double s = 0;
    for (int v : iv) s -= t.vertex(v).x();
    return s;
  };
  REQUIRE_FALSE(validate_mesh(apply_displacement(m, W, -1.5)).valid());
  const LineSearchResult r = line_search(m, W, 1.5, *J(m), J, 0.5, 20);
  REQUIRE(r.accepted);
  CHECK(r.trials > 1);
  CHECK(r.step == doctest::Approx(1.5 * std::pow(0.5, r.trials - 1)).epsilon(1e-15));
  CHECK(validate_mesh(r.mesh).valid());
  CHECK_FALSE(validate_mesh(apply_displacement(m, W, -2 * r.step)).valid());
}

TEST_CASE("failed evaluations count as rejected trials") {
  const Mesh& m = mesh();
  Displacement W = Displacement::Zero(2, m.n_vertices());
  int calls = 0;
  const TrialObjective J = [&](const Mesh&) -> std::optional<double> {
    return ++calls < 3 ? std::nullopt : std::optional<double>(0.0);
  };
  const LineSearchResult r = line_search(m, W, 1.0, 1.0, J, 0.5, 20);
  REQUIRE(r.accepted);
  CHECK(r.trials == 3);
  CHECK(r.step == 0.25);
}

TEST_CASE("stationary start stops at iteration 0") {
  RunConfig cfg = short_run();
  cfg.physics.surface = "1";
  cfg.objective.nu2 = cfg.objective.nu3 = cfg.objective.nu4 = 0;
  const OptimizationResult r = optimize(cfg.build_mesh(), cfg.optimization());
  REQUIRE(r.history.size() == 1);
  CHECK(r.stop_reason == "converged");
  CHECK(r.history[0].iteration == 0);
  CHECK(r.history[0].dj_norm <= cfg.optimizer.tol);
  CHECK(r.history[0].J.total() <= 1e-20);
}

TEST_CASE("max_iterations = 0 returns the initial record") {
  RunConfig cfg = short_run();
  cfg.optimizer.max_iterations = 0;
  const Mesh m = cfg.build_mesh();
  const OptimizationResult r = optimize(m, cfg.optimization());
  REQUIRE(r.history.size() == 1);
  CHECK(r.stop_reason == "max_iterations");
  CHECK(r.history[0].iteration == 0);
  CHECK(r.history[0].J.total() > 0);
  CHECK(r.history[0].dj_norm > 0);
  CHECK((r.final_mesh.vertices - m.vertices).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("short run is monotone, valid and repeatable") {
  const RunConfig cfg = short_run();
  const Mesh m = cfg.build_mesh();
  auto run = [&](std::vector<bool>& valid) {
    return optimize(m, cfg.optimization(), [&](const IterationData& d) {
      valid.push_back(validate_mesh(*d.state.mesh).valid());
    });
  };
  std::vector<bool> v1, v2;
  const OptimizationResult a = run(v1);
  const OptimizationResult b = run(v2);
  INFO("stop reason " << a.stop_reason << " " << a.error);
  REQUIRE(a.stop_reason == "max_iterations");
  REQUIRE(a.history.size() == 3);
  for (std::size_t k = 1; k < a.history.size(); ++k) {
    MESSAGE("J[" << k << "] = " << a.history[k].J.total() << " step " << a.history[k].step);
    CHECK(a.history[k].J.total() < a.history[k - 1].J.total());
  }
  for (bool ok : v1) CHECK(ok);

  REQUIRE(b.history.size() == a.history.size());
  for (std::size_t k = 0; k < a.history.size(); ++k) {
    CHECK(a.history[k].J.J1 == b.history[k].J.J1);
    CHECK(a.history[k].J.J2 == b.history[k].J.J2);
    CHECK(a.history[k].J.J3 == b.history[k].J.J3);
    CHECK(a.history[k].J.J4 == b.history[k].J.J4);
    CHECK(a.history[k].dj_norm == b.history[k].dj_norm);
    CHECK(a.history[k].step == b.history[k].step);
    CHECK(a.history[k].trials == b.history[k].trials);
  }
  CHECK((a.final_mesh.vertices - b.final_mesh.vertices).cwiseAbs().maxCoeff() == 0.0);
  MESSAGE("symmetry mismatch " << symmetry_mismatch(m, a.final_mesh));
}
