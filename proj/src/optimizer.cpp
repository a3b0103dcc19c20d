#include "swopt/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace swopt {

VectorX project_sediment(const Mesh& mesh, const ShapeSetup& setup) {
  SweProblem p(mesh, setup.degree, setup.swe);
  p.set_sediment(setup.sediment);
  return p.z();
}

ShapeState evaluate_shape(const Mesh& mesh, const VectorX& sediment_coeffs, const ShapeSetup& setup) {
  ShapeState s;
  s.mesh = std::make_unique<Mesh>(mesh);
  s.problem = std::make_unique<SweProblem>(*s.mesh, setup.degree, setup.swe);
  s.problem->set_porosity(setup.phi_omega, setup.phi_obstacle);
  s.problem->set_sediment_coeffs(sediment_coeffs);
  s.forward = run_forward(*s.problem, s.problem->initial_state(setup.initial_surface), setup.T, setup.dt);
  s.sdf = solve_eikonal(*s.mesh, setup.eikonal);
  const ObjectiveWeights& w = setup.weights;
  s.J.J1 = eval_J1(*s.problem, s.forward, w.tracking);
  s.J.J2 = eval_J2(*s.mesh, w.nu2);
  s.J.J3 = eval_J3(*s.mesh, w.nu3);
  s.J.J4 = eval_J4(*s.mesh, s.sdf, w.nu4, w.d_min);
  return s;
}

void OptimizationConfig::validate() const {
  if (!(rho0 > 0)) throw ConfigError("config error: initial step must be positive");
  if (!(shrink > 0 && shrink < 1)) throw ConfigError("config error: shrink factor must lie in (0,1)");
  if (!(tol > 0)) throw ConfigError("config error: tolerance must be positive");
  if (max_iterations < 0 || max_trials < 1) throw ConfigError("config error: invalid iteration limits");
  if (!(mu_min > 0) || mu_max < mu_min) throw ConfigError("config error: need mu_max >= mu_min > 0");
}

LineSearchResult line_search(const Mesh& mesh, const Displacement& W, double rho0, double J_current,
                             const TrialObjective& objective, double shrink, int max_trials) {
  LineSearchResult r;
  double rho = rho0;
  for (int k = 0; k < max_trials; ++k, rho *= shrink) {
    r.trials = k + 1;
    Mesh trial = apply_displacement(mesh, W, -rho);
    if (!validate_mesh(trial).valid()) continue;
    const std::optional<double> J = objective(trial);
    if (!J || !(*J < J_current)) continue;
    r.accepted = true;
    r.step = rho;
    r.J = *J;
    r.mesh = std::move(trial);
    return r;
  }
  return r;
}

double symmetry_mismatch(const Mesh& initial, const Mesh& deformed) {
  if (initial.n_vertices() != deformed.n_vertices()) throw Error("argument error: meshes do not match");
  Vec2 c = Vec2::Zero();
  double area = 0;
  for (int k = 0; k < initial.n_cells(); ++k)
    if (initial.regions[k] == Region::Obstacle) {
      const double a = std::abs(initial.signed_area(k));
      c += a * initial.centroid(k);
      area += a;
    }
  if (!(area > 0)) throw Error("argument error: mesh has no obstacle");
  c /= area;
  double num = 0, den = 0;
  for (const Polyline& loop : interface_loops(initial)) {
    // displacement samples sorted by angle about c
    std::vector<std::pair<double, Vec2>> samples;
    for (int v : loop.verts) {
      const Vec2 r = initial.vertex(v) - c;
      samples.emplace_back(std::atan2(r.y(), r.x()), deformed.vertex(v) - initial.vertex(v));
    }
    std::sort(samples.begin(), samples.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    auto interp = [&](double th) {
      const int n = static_cast<int>(samples.size());
      for (int i = 0; i < n; ++i) {
        const auto& a = samples[i];
        const auto& b = samples[(i + 1) % n];
        double t0 = a.first, t1 = b.first, t = th;
        if (i == n - 1) {
          t1 += 2 * M_PI;
          if (t < t0) t += 2 * M_PI;
        }
        if (t >= t0 && t <= t1) {
          const double s = t1 > t0 ? (t - t0) / (t1 - t0) : 0.0;
          return Vec2((1 - s) * a.second + s * b.second);
        }
      }
      return Vec2(samples.front().second);
    };
    for (const auto& [th, d] : samples) {
      double tm = M_PI - th;
      if (tm > M_PI) tm -= 2 * M_PI;
      const Vec2 dm = interp(tm);
      num += (d - Vec2(-dm.x(), dm.y())).squaredNorm();
      den += d.squaredNorm();
    }
  }
  return den > 0 ? std::sqrt(num / den) : 0.0;
}

OptimizationResult optimize(const Mesh& initial, const OptimizationConfig& cfg, const IterationObserver& observer) {
  cfg.validate();
  OptimizationResult out;
  out.final_mesh = initial;
  const ShapeSetup& setup = cfg.setup;
  int iteration = 0;
  try {
    const VectorX z = project_sediment(initial, setup);
    ShapeState state = evaluate_shape(initial, z, setup);
    IterationRecord rec;
    for (;;) {
      rec.iteration = iteration;
      rec.J = state.J;
      const AdjointTrajectory adj = run_adjoint(*state.problem, state.forward, setup.weights.tracking);
      const ShapeGradient G = total_shape_derivative(*state.problem, state.forward, adj, state.sdf, setup.weights);
      const LameField lame = solve_lame_mu(*state.mesh, cfg.mu_min, cfg.mu_max, cfg.lambda);
      const Displacement W = solve_elasticity(*state.mesh, lame, G.total);
      rec.dj_norm = std::sqrt(std::max(0.0, apply(G.total, W)));
      out.history.push_back(rec);
      out.final_mesh = *state.mesh;
      if (observer) observer({rec, state, adj, G, lame, W});
      if (rec.dj_norm <= cfg.tol) {
        out.stop_reason = "converged";
        break;
      }
      if (iteration >= cfg.max_iterations) {
        out.stop_reason = "max_iterations";
        break;
      }
      std::unique_ptr<ShapeState> last;
      auto objective = [&](const Mesh& trial) -> std::optional<double> {
        try {
          last = std::make_unique<ShapeState>(evaluate_shape(trial, z, setup));
        } catch (const SolverError&) {
          last.reset();
          return std::nullopt;
        }
        return last->J.total();
      };
      const LineSearchResult ls =
          line_search(*state.mesh, W, cfg.rho0, state.J.total(), objective, cfg.shrink, cfg.max_trials);
      if (!ls.accepted) {
        out.stop_reason = "line_search_failed";
        break;
      }
      // the accepted trial is the last one evaluated
      state = std::move(*last);
      ++iteration;
      rec = IterationRecord{};
      rec.step = ls.step;
      rec.trials = ls.trials;
    }
  } catch (const Error& e) {
    std::ostringstream os;
    os << "iteration " << iteration << ": " << e.what();
    out.stop_reason = "error";
    out.error = os.str();
  }
  return out;
}

}  // namespace swopt
