#include "swopt/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace swopt {

namespace {

struct Tri {
  std::array<int, 3> v;
  Vec2 cc;
  double r2;
};

Tri make_tri(const std::vector<Vec2>& p, int a, int b, int c) {
  const Vec2 &A = p[a], &B = p[b], &C = p[c];
  const double d = 2.0 * (A.x() * (B.y() - C.y()) + B.x() * (C.y() - A.y()) + C.x() * (A.y() - B.y()));
  const double a2 = A.squaredNorm(), b2 = B.squaredNorm(), c2 = C.squaredNorm();
  Vec2 cc((a2 * (B.y() - C.y()) + b2 * (C.y() - A.y()) + c2 * (A.y() - B.y())) / d,
          (a2 * (C.x() - B.x()) + b2 * (A.x() - C.x()) + c2 * (B.x() - A.x())) / d);
  Tri t;
  t.v = {a, b, c};
  const double orientation = (B - A).x() * (C - A).y() - (B - A).y() * (C - A).x();
  if (orientation < 0) t.v = {a, c, b};
  t.cc = cc;
  t.r2 = (A - cc).squaredNorm();
  return t;
}

// Bowyer-Watson; returns counterclockwise triangles over the input points
std::vector<std::array<int, 3>> delaunay(std::vector<Vec2> pts) {
  const int n = static_cast<int>(pts.size());
  Vec2 lo = pts[0], hi = pts[0];
  for (const auto& q : pts) {
    lo = lo.cwiseMin(q);
    hi = hi.cwiseMax(q);
  }
  const double span = (hi - lo).maxCoeff();
  const Vec2 mid = 0.5 * (lo + hi);
  pts.push_back(mid + Vec2(-20 * span, -10 * span));
  pts.push_back(mid + Vec2(20 * span, -10 * span));
  pts.push_back(mid + Vec2(0, 20 * span));
  std::vector<Tri> tris{make_tri(pts, n, n + 1, n + 2)};
  for (int i = 0; i < n; ++i) {
    const Vec2& p = pts[i];
    std::vector<Tri> keep;
    std::map<std::array<int, 2>, int> edges;
    for (const auto& t : tris) {
      if ((p - t.cc).squaredNorm() < t.r2 * (1 - 1e-12)) {
        for (int k = 0; k < 3; ++k) {
          int a = t.v[k], b = t.v[(k + 1) % 3];
          std::array<int, 2> key = a < b ? std::array<int, 2>{a, b} : std::array<int, 2>{b, a};
          edges[key]++;
        }
      } else {
        keep.push_back(t);
      }
    }
    for (auto& [e, cnt] : edges)
      if (cnt == 1) keep.push_back(make_tri(pts, e[0], e[1], i));
    tris.swap(keep);
  }
  std::vector<std::array<int, 3>> out;
  for (const auto& t : tris)
    if (t.v[0] < n && t.v[1] < n && t.v[2] < n) out.push_back(t.v);
  return out;
}

}  // namespace

Mesh build_half_circle(double radius, const Vec2& oc, double orad, double target_h) {
  if (!(radius > 0) || !(target_h > 0)) throw Error("argument error: radius and target_h must be positive");
  if (!(orad > 0)) throw MeshError("geometry error: obstacle radius must be positive");
  const Vec2 center(radius, 0.0);
  if (oc.y() - orad <= 0 || (oc - center).norm() + orad >= radius)
    throw MeshError("geometry error: obstacle intersects the outer boundary");

  const double h_near = 0.5 * 0.5 * target_h;
  const double h_far = 2.0 * target_h;
  auto dist_obs = [&](const Vec2& p) { return std::abs((p - oc).norm() - orad); };
  auto hsize = [&](const Vec2& p) {
    const double grade = (p - oc).norm() < orad ? 0.1 : 0.35;
    return std::min(h_far, h_near + grade * dist_obs(p));
  };

  std::vector<Vec2> pts;
  BoundaryTagMap btags;

  // outer boundary: diameter (left half then mirrored) and arc (symmetric about the top)
  std::vector<double> xs{0.0};
  while (true) {
    const double x = xs.back();
    double step = hsize(Vec2(x, 0));
    if (x + step >= radius - 0.3 * step) break;
    xs.push_back(x + step);
  }
  {
    const double scale = radius / (xs.back() + hsize(Vec2(xs.back(), 0)));
    for (auto& x : xs) x *= scale;
  }
  std::vector<Vec2> diam;
  for (double x : xs) diam.emplace_back(x, 0);
  diam.emplace_back(radius, 0);
  for (int i = static_cast<int>(xs.size()) - 1; i >= 0; --i) diam.emplace_back(2 * radius - xs[i], 0);

  std::vector<double> th{0.0};
  while (true) {
    const double a = th.back();
    const Vec2 q = center + radius * Vec2(std::cos(a), std::sin(a));
    const double da = hsize(q) / radius;
    if (a + da >= M_PI / 2 - 0.3 * da) break;
    th.push_back(a + da);
  }
  {
    const double last = th.back();
    const Vec2 q = center + radius * Vec2(std::cos(last), std::sin(last));
    const double scale = (M_PI / 2) / (last + hsize(q) / radius);
    for (auto& a : th) a *= scale;
  }
  std::vector<double> arc_angles;
  for (size_t i = 1; i < th.size(); ++i) arc_angles.push_back(th[i]);
  arc_angles.push_back(M_PI / 2);
  for (int i = static_cast<int>(th.size()) - 1; i >= 1; --i) arc_angles.push_back(M_PI - th[i]);

  // outer loop, counterclockwise: diameter left->right, then arc right->left
  std::vector<int> outer;
  for (const auto& q : diam) {
    outer.push_back(static_cast<int>(pts.size()));
    pts.push_back(q);
  }
  for (double a : arc_angles) {
    outer.push_back(static_cast<int>(pts.size()));
    pts.push_back(center + radius * Vec2(std::cos(a), std::sin(a)));
  }
  const int n_diam = static_cast<int>(diam.size());
  for (size_t i = 0; i < outer.size(); ++i) {
    const int a = outer[i], b = outer[(i + 1) % outer.size()];
    const bool on_diam = static_cast<int>(i) < n_diam - 1;
    btags.keys.push_back({a, b});
    btags.tags.push_back(on_diam ? Tag::Shore : Tag::OpenSea);
  }

  // obstacle circle, vertex count a multiple of 4, first vertex at the top
  int n_obs = static_cast<int>(std::ceil(2 * M_PI * orad / h_near));
  n_obs = std::max(8, (n_obs + 3) / 4 * 4);
  std::vector<int> ring;
  for (int k = 0; k < n_obs; ++k) {
    const double a = M_PI / 2 + 2 * M_PI * k / n_obs;
    ring.push_back(static_cast<int>(pts.size()));
    pts.push_back(oc + orad * Vec2(std::cos(a), std::sin(a)));
  }
  const int n_fixed = static_cast<int>(pts.size());

  // interior points: greedy spacing over a lattice, mirrored about x = oc.x
  const double axis = oc.x();
  const double dx = 0.25 * h_near;
  auto inside = [&](const Vec2& p) { return p.y() > 0 && (p - center).norm() < radius; };
  auto too_close = [&](const Vec2& p, double d) {
    for (const auto& q : pts)
      if ((p - q).squaredNorm() < d * d) return true;
    return false;
  };
  const int nx = static_cast<int>(std::ceil(axis / dx));
  const int ny = static_cast<int>(std::ceil(radius / dx));
  // visit candidates from the obstacle outward so the fine zone is laid down first
  std::vector<std::pair<double, Vec2>> cand;
  for (int j = 1; j < ny; ++j)
    for (int i = 0; i <= nx; ++i) {
      const double x = axis - i * dx;
      const double y = j * dx + ((i % 2) ? 0.5 * dx : 0.0);
      const Vec2 p(x, y);
      if (!inside(p)) continue;
      cand.emplace_back(dist_obs(p), p);
    }
  std::stable_sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [d, p] : cand) {
    const double hs = hsize(p);
    if (radius - (p - center).norm() < 0.6 * hs || p.y() < 0.6 * hs) continue;
    if (dist_obs(p) < 0.6 * hs) continue;
    const bool on_axis = std::abs(p.x() - axis) < 1e-12;
    if (!on_axis && 2 * (axis - p.x()) < 0.85 * hs) continue;
    if (too_close(p, 0.85 * hs)) continue;
    pts.push_back(p);
    if (!on_axis) {
      const Vec2 m(2 * axis - p.x(), p.y());
      if (inside(m)) pts.push_back(m);
    }
  }

  // triangulate; split obstacle segments that the triangulation misses
  std::vector<std::array<int, 3>> tris;
  for (int pass = 0; pass < 20; ++pass) {
    tris = delaunay(pts);
    std::set<std::array<int, 2>> edges;
    for (const auto& t : tris)
      for (int k = 0; k < 3; ++k) {
        int a = t[k], b = t[(k + 1) % 3];
        edges.insert(a < b ? std::array<int, 2>{a, b} : std::array<int, 2>{b, a});
      }
    std::vector<int> new_ring;
    bool missing = false;
    for (size_t i = 0; i < ring.size(); ++i) {
      const int a = ring[i], b = ring[(i + 1) % ring.size()];
      new_ring.push_back(a);
      if (!edges.count(a < b ? std::array<int, 2>{a, b} : std::array<int, 2>{b, a})) {
        missing = true;
        Vec2 m = 0.5 * (pts[a] + pts[b]);
        m = oc + orad * (m - oc).normalized();
        new_ring.push_back(static_cast<int>(pts.size()));
        pts.push_back(m);
      }
    }
    ring.swap(new_ring);
    if (!missing) break;
    if (pass == 19) throw MeshError("geometry error: could not recover obstacle boundary");
  }
  (void)n_fixed;

  Mesh m;
  m.dim = 2;
  m.vertices.resize(2, static_cast<long>(pts.size()));
  for (size_t i = 0; i < pts.size(); ++i) m.vertices.col(static_cast<long>(i)) = pts[i];
  for (const auto& t : tris) {
    const Vec2 c = (pts[t[0]] + pts[t[1]] + pts[t[2]]) / 3.0;
    if (!inside(c)) continue;
    m.cells.push_back(t);
    m.regions.push_back((c - oc).norm() < orad ? Region::Obstacle : Region::OmegaTilde);
  }
  // drop vertices not referenced by any cell
  std::vector<int> remap(pts.size(), -1);
  int nv = 0;
  for (auto& c : m.cells)
    for (int& v : c) {
      if (remap[v] < 0) remap[v] = nv++;
    }
  Eigen::Matrix2Xd verts(2, nv);
  for (size_t i = 0; i < pts.size(); ++i)
    if (remap[i] >= 0) verts.col(remap[i]) = pts[i];
  for (auto& c : m.cells)
    for (int& v : c) v = remap[v];
  for (auto& k : btags.keys) k = {remap[k[0]], remap[k[1]]};
  m.vertices = verts;
  for (int c = 0; c < m.n_cells(); ++c)
    if (!(m.signed_area(c) > 0)) throw MeshError("geometry error: generator produced an inverted cell");
  build_facets(m, btags);
  return m;
}

}  // namespace swopt
