#include "swopt/scenarios.hpp"

#include "swopt/expression.hpp"
#include "swopt/output.hpp"

#include "json.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <future>
#include <iostream>
#include <random>

namespace swopt {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string numbered(const std::string& dir, const std::string& stem, int n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "_%04d.vtk", n);
  return dir + "/" + stem + buf;
}

std::vector<int> output_steps(int n_steps, int stride) {
  std::vector<int> out;
  if (stride <= 0) {
    out = {0, n_steps};
  } else {
    for (int n = 0; n <= n_steps; n += stride) out.push_back(n);
    if (out.back() != n_steps) out.push_back(n_steps);
  }
  if (n_steps == 0) out.resize(1);
  return out;
}

Eigen::MatrixXd row_of(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::RowVectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::MatrixXd row_of(const VectorX& v) { return v.transpose(); }

void write_state_vtk(const std::string& path, const SweProblem& prob, const VectorX& u, const VectorX& mu_v) {
  const Eigen::MatrixXd nodal = vertex_values(prob, u);  // H, u, v
  const Eigen::MatrixXd z = vertex_average(prob.zspace(), prob.z());
  std::vector<VtkField> pts{{"H", nodal.col(0).transpose()}, {"z", z}};
  pts.push_back({"velocity", nodal.rightCols(2).transpose()});
  write_vtk(path, prob.mesh(), pts, {{"phi", row_of(prob.phi())}, {"mu_v", row_of(mu_v)}});
}

// per component L2 norms with the DG mass matrix
Eigen::VectorXd component_norms(const SweProblem& prob, const VectorX& M, const VectorX& x) {
  const DGSpace& s = prob.space();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(prob.ncomp());
  for (int c = 0; c < prob.mesh().n_cells(); ++c)
    for (int k = 0; k < prob.ncomp(); ++k) {
      const int i = s.index(c, k, 0);
      out[k] += (M.segment(i, s.nb()).array() * x.segment(i, s.nb()).array().square()).sum();
    }
  return out.cwiseSqrt();
}

nlohmann::json objective_json(const ObjectiveValue& J) {
  return {{"J1", J.J1}, {"J2", J.J2}, {"J3", J.J3}, {"J4", J.J4}, {"J", J.total()}};
}

void write_field_vtk(const std::string& path, const Mesh& mesh, const SignedDistance& sdf, const ShapeGradient& G,
                     const Displacement* W, const LameField* lame) {
  std::vector<VtkField> pts{{"sdf", row_of(sdf.w)}, {"DJ", G.total}, {"DJ1", G.dj1},
                            {"DJ2", G.dj2},         {"DJ3", G.dj3},  {"DJ4", G.dj4}};
  if (W) pts.push_back({"W", *W});
  if (lame) pts.push_back({"mu_elas", row_of(lame->mu)});
  write_vtk(path, mesh, pts);
}

struct Context {
  const RunConfig& cfg;
  std::ostream& log;
  std::string dir;
  nlohmann::json summary;
  std::string stage = "setup";
};

int scenario_forward(Context& cx) {
  const RunConfig& cfg = cx.cfg;
  cx.stage = "mesh";
  const Mesh mesh = cfg.build_mesh();
  cx.stage = "forward";
  auto prob = make_problem(mesh, cfg);
  const Expression eta(cfg.physics.surface), qx(cfg.physics.uH), qy(cfg.physics.vH);
  const VectorX u0 = prob->initial_state([&](const Vec2& x) { return Vec3(eta(x), qx(x), qy(x)); });
  const Trajectory tr = run_forward(*prob, u0, cfg.discretization.T, cfg.discretization.dt);
  cx.stage = "output";
  CsvWriter csv(cx.dir + "/forward_series.csv", {"step", "t", "mass", "energy", "max_speed", "newton_iterations"});
  for (int n = 0; n <= tr.n_steps(); ++n) {
    const Diagnostics d = diagnostics(*prob, tr.states[n]);
    csv.row({double(n), tr.times[n], d.mass, d.energy, d.max_speed,
             n ? double(tr.reports[n - 1].iterations) : 0.0});
  }
  for (int n : output_steps(tr.n_steps(), cfg.output.vtk_stride)) {
    const VectorX mu = tr.mu_v.empty() ? VectorX::Zero(mesh.n_cells()) : tr.mu_v[std::min<std::size_t>(n, tr.mu_v.size() - 1)];
    write_state_vtk(numbered(cx.dir, "forward", n), *prob, tr.states[n], mu);
  }
  const Diagnostics d0 = diagnostics(*prob, tr.states.front()), d1 = diagnostics(*prob, tr.states.back());
  cx.summary["cells"] = mesh.n_cells();
  cx.summary["steps"] = tr.n_steps();
  cx.summary["mass_initial"] = d0.mass;
  cx.summary["mass_final"] = d1.mass;
  cx.log << "forward: " << tr.n_steps() << " steps on " << mesh.n_cells() << " cells, mass drift "
         << format_number(d1.mass - d0.mass) << "\n";
  return 0;
}

int scenario_adjoint(Context& cx) {
  const RunConfig& cfg = cx.cfg;
  cx.stage = "mesh";
  const Mesh mesh = cfg.build_mesh();
  const ShapeSetup setup = cfg.shape_setup();
  cx.stage = "forward";
  const ShapeState st = evaluate_shape(mesh, project_sediment(mesh, setup), setup);
  cx.stage = "adjoint";
  const AdjointTrajectory adj = run_adjoint(*st.problem, st.forward, setup.weights.tracking);
  cx.stage = "shape derivative";
  const ShapeGradient G = total_shape_derivative(*st.problem, st.forward, adj, st.sdf, setup.weights);
  cx.stage = "output";
  const VectorX M = SweOperator(*st.problem, VectorX::Zero(mesh.n_cells())).mass();
  CsvWriter csv(cx.dir + "/adjoint_norms.csv", {"step", "t", "p", "r1", "r2"});
  for (int n = 1; n <= st.forward.n_steps(); ++n) {
    const Eigen::VectorXd nrm = component_norms(*st.problem, M, adj.states[n]);
    csv.row({double(n), st.forward.times[n], nrm[0], nrm[1], nrm.size() > 2 ? nrm[2] : 0.0});
  }
  for (int n : output_steps(st.forward.n_steps(), cfg.output.vtk_stride)) {
    if (n == 0) continue;
    const Eigen::MatrixXd P = vertex_average(st.problem->space(), adj.states[n]);
    write_vtk(numbered(cx.dir, "adjoint", n), mesh, {{"p", P.row(0)}, {"r", P.bottomRows(P.rows() - 1)}});
  }
  write_field_vtk(cx.dir + "/shape_gradient.vtk", mesh, st.sdf, G, nullptr, nullptr);
  cx.summary["objective"] = objective_json(st.J);
  cx.summary["dj_l2"] = G.total.norm();
  cx.log << "adjoint: J = " << format_number(st.J.total()) << ", |DJ| = " << format_number(G.total.norm()) << "\n";
  return 0;
}

int scenario_optimize(Context& cx) {
  const RunConfig& cfg = cx.cfg;
  cx.stage = "mesh";
  const Mesh mesh = cfg.build_mesh();
  if (!validate_mesh(mesh).valid()) throw MeshError("geometry error: initial mesh is invalid");
  write_vtk(cx.dir + "/initial_mesh.vtk", mesh);
  cx.stage = "optimize";
  const OptimizationConfig oc = cfg.optimization();
  CsvWriter csv(cx.dir + "/history.csv",
                {"iteration", "J1", "J2", "J3", "J4", "J", "dj_norm", "step", "trials", "valid"});
  bool all_valid = true;
  auto observer = [&](const IterationData& d) {
    const bool valid = validate_mesh(*d.state.mesh).valid();
    all_valid = all_valid && valid;
    const IterationRecord& r = d.record;
    csv.row({double(r.iteration), r.J.J1, r.J.J2, r.J.J3, r.J.J4, r.J.total(), r.dj_norm, r.step,
             double(r.trials), valid ? 1.0 : 0.0});
    cx.log << "iteration " << r.iteration << ": J = " << format_number(r.J.total())
           << ", |DJ| = " << format_number(r.dj_norm) << "\n";
    if (cfg.output.vtk_stride > 0 && r.iteration % cfg.output.vtk_stride == 0)
      write_field_vtk(numbered(cx.dir, "iteration", r.iteration), *d.state.mesh, d.state.sdf, d.gradient, &d.W,
                      &d.lame);
  };
  const OptimizationResult res = optimize(mesh, oc, observer);
  cx.stage = "output";
  write_msh(res.final_mesh, cx.dir + "/final_mesh.msh");
  write_vtk(cx.dir + "/final_mesh.vtk", res.final_mesh);
  bool decreasing = true;
  for (std::size_t i = 1; i < res.history.size(); ++i)
    decreasing = decreasing && res.history[i].J.total() < res.history[i - 1].J.total();
  const double J0 = res.history.empty() ? 0.0 : res.history.front().J.total();
  const double J1 = res.history.empty() ? 0.0 : res.history.back().J.total();
  cx.summary["iterations"] = res.history.empty() ? 0 : res.history.back().iteration;
  cx.summary["stop_reason"] = res.stop_reason;
  cx.summary["J_initial"] = J0;
  cx.summary["J_final"] = J1;
  cx.summary["relative_decrease"] = J0 != 0 ? (J0 - J1) / J0 : 0.0;
  cx.summary["strictly_decreasing"] = decreasing;
  cx.summary["all_valid"] = all_valid;
  cx.summary["symmetry_mismatch"] = symmetry_mismatch(mesh, res.final_mesh);
  if (!res.history.empty()) cx.summary["objective"] = objective_json(res.history.back().J);
  cx.log << "optimize: " << res.stop_reason << ", J " << format_number(J0) << " -> " << format_number(J1) << "\n";
  if (res.stop_reason == "error") {
    cx.stage = "optimize";
    throw Error(res.error);
  }
  return 0;
}

int scenario_wellbalance(Context& cx) {
  // the open sea has to sit at the lake level
  RunConfig cfg = cx.cfg;
  cfg.physics.H1 = cfg.wellbalance.level;
  cx.stage = "mesh";
  const Mesh mesh = cfg.build_mesh();
  cx.stage = "forward";
  auto prob = make_problem(mesh, cfg);
  const WellbalanceResult r =
      wellbalance_check(*prob, cfg.wellbalance.level, cfg.discretization.T, cfg.discretization.dt);
  cx.summary["max_uh"] = r.max_q;
  cx.summary["max_surface_deviation"] = r.max_surface;
  cx.summary["steps"] = r.steps;
  const bool ok = r.max_q <= cfg.wellbalance.tol && r.max_surface <= cfg.wellbalance.tol;
  cx.summary["passed"] = ok;
  cx.log << "max |uh| = " << format_number(r.max_q) << "\nmax |h/phi + z - C| = " << format_number(r.max_surface)
         << "\n";
  return ok ? 0 : 1;
}

int scenario_smoothing(Context& cx) {
  const RunConfig& cfg = cx.cfg;
  cx.stage = "smoothing study";
  const std::vector<SmoothingRow> rows =
      run_convergence_study(cfg.smoothing.alphas, cfg.smoothing_study(), cfg.threads);
  CsvWriter csv(cx.dir + "/smoothing.csv", {"alpha", "E_H", "E_uH", "E_H_cell", "E_uH_cell"});
  for (const SmoothingRow& r : rows) {
    csv.row({r.alpha, r.norms.E_H, r.norms.E_uH, r.norms.E_H_cell, r.norms.E_uH_cell});
    cx.log << "alpha " << r.alpha << ": E_H " << format_number(r.norms.E_H) << ", E_uH "
           << format_number(r.norms.E_uH) << "\n";
  }
  bool decreasing = true;
  for (std::size_t i = 1; i < rows.size(); ++i)
    decreasing = decreasing && rows[i].norms.E_H < rows[i - 1].norms.E_H && rows[i].norms.E_uH < rows[i - 1].norms.E_uH;
  cx.summary["strictly_decreasing"] = decreasing;
  cx.summary["rows"] = rows.size();
  return 0;
}

int scenario_gradient(Context& cx) {
  const RunConfig& cfg = cx.cfg;
  cx.stage = "mesh";
  const Mesh mesh = cfg.build_mesh();
  cx.stage = "gradient check";
  const auto dirs = random_directions(mesh, cfg.gradient.directions, cfg.gradient.seed);
  const GradientCheckReport rep = gradient_check(mesh, cfg.shape_setup(), dirs, cfg.gradient.epsilons, cfg.threads);
  CsvWriter csv(cx.dir + "/gradient_check.csv", {"direction", "eps", "DJ", "FD", "rel_error"});
  for (const GradientCheckRow& r : rep.rows) {
    csv.row({double(r.direction), r.eps, r.dj, r.fd, r.rel});
    cx.log << "direction " << r.direction << " eps " << r.eps << ": DJ " << format_number(r.dj) << " FD "
           << format_number(r.fd) << " rel " << format_number(r.rel) << "\n";
  }
  cx.summary["cells"] = mesh.n_cells();
  cx.summary["dj2_dilation"] = rep.dj2_dilation;
  cx.summary["dj2_exact"] = rep.dj2_exact;
  cx.log << "DJ2 dilation " << format_number(rep.dj2_dilation) << " exact " << format_number(rep.dj2_exact) << "\n";
  return 0;
}

}  // namespace

std::unique_ptr<SweProblem> make_problem(const Mesh& mesh, const RunConfig& cfg) {
  auto prob = std::make_unique<SweProblem>(mesh, cfg.discretization.degree, cfg.swe_params());
  if (cfg.physics.porosity.empty()) {
    prob->set_porosity(cfg.physics.phi_omega, cfg.physics.phi_obstacle);
  } else {
    const Expression phi(cfg.physics.porosity);
    std::vector<double> v(mesh.n_cells());
    for (int c = 0; c < mesh.n_cells(); ++c) {
      v[c] = phi(mesh.centroid(c));
      if (!(v[c] > 0 && v[c] <= 1)) throw ConfigError("config error: physics.porosity: value outside (0, 1]");
    }
    prob->set_porosity(std::move(v));
  }
  const Expression z(cfg.physics.sediment);
  prob->set_sediment([&](const Vec2& x) { return z(x); });
  return prob;
}

WellbalanceResult wellbalance_check(const SweProblem& prob, double level, double T, double dt) {
  const DGSpace& s = prob.space();
  const Mesh& m = prob.mesh();
  std::vector<Vec2> pts{Vec2(0, 0), Vec2(1, 0)};
  if (m.dim == 2) pts.push_back(Vec2(0, 1));
  for (const Vec2& q : s.cell_rule().points) pts.push_back(q);
  std::vector<Eigen::VectorXd> basis;
  for (const Vec2& p : pts) basis.push_back(s.basis().eval_all(p));
  WellbalanceResult r;
  auto sample = [&](int, double, const VectorX& u) {
    for (int c = 0; c < m.n_cells(); ++c)
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const double h = basis[i].dot(u.segment(s.index(c, 0, 0), s.nb()));
        r.max_surface = std::max(r.max_surface, std::abs(h / prob.phi()[c] + prob.z_at(c, pts[i]) - level));
        for (int k = 1; k < prob.ncomp(); ++k)
          r.max_q = std::max(r.max_q, std::abs(basis[i].dot(u.segment(s.index(c, k, 0), s.nb()))));
      }
  };
  const VectorX u0 = prob.lake_at_rest(level);
  sample(0, 0.0, u0);
  const Trajectory tr = run_forward(prob, u0, T, dt, sample);
  r.steps = tr.n_steps();
  return r;
}

std::vector<VertexField> random_directions(const Mesh& mesh, int n, unsigned seed) {
  const std::vector<bool> keep = gradient_support(mesh);
  std::mt19937 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<VertexField> out;
  for (int k = 0; k < n; ++k) {
    VertexField V = VertexField::Zero(2, mesh.n_vertices());
    for (int i = 0; i < mesh.n_vertices(); ++i)
      if (keep[i]) V.col(i) = Vec2(nd(rng), nd(rng));
    out.push_back(V);
  }
  return out;
}

GradientCheckReport gradient_check(const Mesh& mesh, const ShapeSetup& setup, const std::vector<VertexField>& dirs,
                                   const std::vector<double>& eps, int threads) {
  const VectorX z = project_sediment(mesh, setup);
  const ShapeState st = evaluate_shape(mesh, z, setup);
  const AdjointTrajectory adj = run_adjoint(*st.problem, st.forward, setup.weights.tracking);
  const ShapeGradient G = total_shape_derivative(*st.problem, st.forward, adj, st.sdf, setup.weights);

  // all perturbed objectives are independent; evaluate them in batches of `threads`
  struct Job {
    int d;
    double e;
  };
  std::vector<Job> jobs;
  for (int d = 0; d < static_cast<int>(dirs.size()); ++d)
    for (double e : eps) {
      jobs.push_back({d, e});
      jobs.push_back({d, -e});
    }
  std::vector<double> J(jobs.size());
  auto eval = [&](const Job& j) { return evaluate_shape(apply_displacement(mesh, dirs[j.d], j.e), z, setup).J.total(); };
  const std::size_t batch = static_cast<std::size_t>(std::max(1, threads));
  for (std::size_t i0 = 0; i0 < jobs.size(); i0 += batch) {
    std::vector<std::future<double>> fs;
    for (std::size_t i = i0; i < std::min(jobs.size(), i0 + batch); ++i)
      fs.push_back(std::async(batch > 1 ? std::launch::async : std::launch::deferred, eval, jobs[i]));
    for (std::size_t k = 0; k < fs.size(); ++k) J[i0 + k] = fs[k].get();
  }

  GradientCheckReport rep;
  for (std::size_t i = 0; i < jobs.size(); i += 2) {
    GradientCheckRow r;
    r.direction = jobs[i].d;
    r.eps = jobs[i].e;
    r.dj = apply(G.total, dirs[r.direction]);
    r.fd = (J[i] - J[i + 1]) / (2 * r.eps);
    r.rel = std::abs(r.dj - r.fd) / std::abs(r.fd);
    rep.rows.push_back(r);
  }

  // dilation about the obstacle centroid: div V = 2
  Vec2 c = Vec2::Zero();
  double area = 0;
  for (int k = 0; k < mesh.n_cells(); ++k)
    if (mesh.regions[k] == Region::Obstacle) {
      const double a = std::abs(mesh.signed_area(k));
      c += a * mesh.centroid(k);
      area += a;
    }
  c /= area;
  VertexField V = mesh.vertices.colwise() - c;
  rep.dj2_dilation = apply(assemble_DJ2(mesh, setup.weights.nu2), V);
  rep.dj2_exact = 2 * setup.weights.nu2 * region_area(mesh, Region::Obstacle);
  return rep;
}

int run_scenario(const RunConfig& cfg, std::ostream& log) {
  Context cx{cfg, log, cfg.output_dir, {}};
  const auto t0 = Clock::now();
  int status = 0;
  try {
    std::filesystem::create_directories(cx.dir);
    write_text(cx.dir + "/config_echo.ini", config_echo(cfg));
    switch (cfg.scenario) {
      case Scenario::Forward: status = scenario_forward(cx); break;
      case Scenario::Adjoint: status = scenario_adjoint(cx); break;
      case Scenario::Optimize: status = scenario_optimize(cx); break;
      case Scenario::WellbalanceCheck: status = scenario_wellbalance(cx); break;
      case Scenario::SmoothingStudy: status = scenario_smoothing(cx); break;
      case Scenario::GradientCheck: status = scenario_gradient(cx); break;
    }
  } catch (const std::exception& e) {
    log << "error in stage " << cx.stage << ": " << e.what() << "\n";
    cx.summary["error"] = e.what();
    cx.summary["failed_stage"] = cx.stage;
    status = 3;
  }
  cx.summary["scenario"] = scenario_name(cfg.scenario);
  cx.summary["exit_status"] = status;
  cx.summary["wall_time"] = seconds_since(t0);
  try {
    write_text(cx.dir + "/summary.json", cx.summary.dump(2) + "\n");
  } catch (const std::exception& e) {
    log << "error in stage summary: " << e.what() << "\n";
    if (status == 0) status = 3;
  }
  return status;
}

}  // namespace swopt
