#include "swopt/porosity_smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <sstream>

namespace swopt {

void SmoothedPorosity::validate() const {
  if (!(alpha > 0)) throw Error("argument error: alpha must be positive");
  if (!(x0 < x1)) throw Error("argument error: need x0 < x1");
  if (!(alpha < 0.5 * (x1 - x0))) throw Error("argument error: transition zones overlap (alpha >= (x1 - x0)/2)");
  if (!(phi2 > 0 && phi2 <= 1)) throw Error("argument error: phi2 must lie in (0,1]");
}

namespace {

double blend(double s) { return -0.25 * s * s * s + 0.75 * s + 0.5; }

}  // namespace

double eval_psi(double x, const SmoothedPorosity& p) {
  if (x <= p.x0 - p.alpha || x >= p.x1 + p.alpha) return 1.0;
  if (x >= p.x0 + p.alpha && x <= p.x1 - p.alpha) return 0.0;
  if (x < p.x0 + p.alpha) return blend((p.x0 - x) / p.alpha);
  return 1.0 - blend((p.x1 - x) / p.alpha);
}

double eval_phi_alpha(double x, const SmoothedPorosity& p) {
  const double psi = eval_psi(x, p);
  return (1.0 - psi) * p.phi2 + psi;
}

double eval_phi_sharp(double x, const SmoothedPorosity& p) { return (x > p.x0 && x < p.x1) ? p.phi2 : 1.0; }

ErrorNorms error_norms(const SweProblem& a, const Trajectory& ta, const SweProblem& b, const Trajectory& tb) {
  if (&a.mesh() != &b.mesh() && a.mesh().n_cells() != b.mesh().n_cells())
    throw Error("argument error: runs live on different meshes");
  if (ta.n_steps() != tb.n_steps()) throw Error("trajectory mismatch: different step counts");
  const DGSpace& s = a.space();
  const QuadRule& q = s.cell_rule();
  const int nb = s.nb();
  ErrorNorms e;
  for (int n = 1; n <= ta.n_steps(); ++n) {
    const double dt = ta.times[n] - ta.times[n - 1];
    for (int c = 0; c < a.mesh().n_cells(); ++c) {
      const double pa = a.phi()[c], pb = b.phi()[c];
      double mh = 0, mq = 0, vol = 0;
      for (int k = 0; k < q.size(); ++k) {
        double dH = 0, dQ = 0;
        for (int i = 0; i < nb; ++i) {
          dH += s.phi_q()(k, i) * (ta.states[n][s.index(c, 0, i)] / pa - tb.states[n][s.index(c, 0, i)] / pb);
          dQ += s.phi_q()(k, i) * (ta.states[n][s.index(c, 1, i)] / pa - tb.states[n][s.index(c, 1, i)] / pb);
        }
        const double w = q.weights[k] * std::abs(s.det(c));
        e.E_H += dt * w * dH * dH;
        e.E_uH += dt * w * dQ * dQ;
        mh += w * dH;
        mq += w * dQ;
        vol += w;
      }
      mh /= vol;
      mq /= vol;
      e.E_H_cell += dt * mh * mh;
      e.E_uH_cell += dt * mq * mq;
    }
  }
  e.E_H = std::sqrt(e.E_H);
  e.E_uH = std::sqrt(e.E_uH);
  e.E_H_cell = std::sqrt(e.E_H_cell);
  e.E_uH_cell = std::sqrt(e.E_uH_cell);
  return e;
}

namespace {

// cell means of a porosity profile, by high-order Gauss quadrature
std::vector<double> cell_means(const Mesh& m, const std::function<double(double)>& f) {
  const QuadRule g = gauss_legendre(8);
  std::vector<double> out(m.n_cells());
  for (int c = 0; c < m.n_cells(); ++c) {
    const double a = m.vertex(m.cells[c][0]).x(), b = m.vertex(m.cells[c][1]).x();
    double v = 0;
    for (int k = 0; k < g.size(); ++k) v += g.weights[k] * f(a + g.points[k].x() * (b - a));
    out[c] = v;
  }
  return out;
}

Trajectory run_1d(const SweProblem& prob, const SmoothingStudyConfig& cfg) {
  const auto H0 = cfg.initial_height;
  return run_forward(prob, prob.initial_state([&](const Vec2& x) { return Vec3(H0(x.x()), 0.0, 0.0); }), cfg.T, cfg.dt);
}

}  // namespace

std::vector<SmoothingRow> run_convergence_study(const std::vector<double>& alphas, const SmoothingStudyConfig& cfg,
                                                int threads) {
  const Mesh mesh = build_interval(cfg.n_cells, cfg.length);
  SmoothedPorosity sp{0.0, cfg.x0, cfg.x1, cfg.phi2};
  SweProblem sharp(mesh, cfg.degree, cfg.swe);
  sharp.set_porosity(cell_means(mesh, [&](double x) { return eval_phi_sharp(x, sp); }));
  const Trajectory ts = run_1d(sharp, cfg);

  auto one = [&](double a) {
    SmoothedPorosity p = sp;
    p.alpha = a;
    try {
      p.validate();
      SweProblem smooth(mesh, cfg.degree, cfg.swe);
      smooth.set_porosity(cell_means(mesh, [&](double x) { return eval_phi_alpha(x, p); }));
      return SmoothingRow{a, error_norms(sharp, ts, smooth, run_1d(smooth, cfg))};
    } catch (const Error& e) {
      std::ostringstream os;
      os << e.what() << " (alpha=" << a << ")";
      throw Error(os.str());
    }
  };

  // rows keep the order of alphas whatever the thread count
  std::vector<SmoothingRow> rows(alphas.size());
  const std::size_t batch = static_cast<std::size_t>(std::max(1, threads));
  for (std::size_t i0 = 0; i0 < alphas.size(); i0 += batch) {
    std::vector<std::future<SmoothingRow>> jobs;
    for (std::size_t i = i0; i < std::min(alphas.size(), i0 + batch); ++i)
      jobs.push_back(std::async(batch > 1 ? std::launch::async : std::launch::deferred, one, alphas[i]));
    for (std::size_t j = 0; j < jobs.size(); ++j) rows[i0 + j] = jobs[j].get();
  }
  return rows;
}

}  // namespace swopt
