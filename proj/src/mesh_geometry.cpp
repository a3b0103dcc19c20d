#include "swopt/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

namespace swopt {

namespace {

std::array<int, 2> sorted_key(int a, int b) { return a < b ? std::array<int, 2>{a, b} : std::array<int, 2>{b, a}; }

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

void facet_geometry(const Mesh& mesh, Facet& f) {
  if (mesh.dim == 1) {
    f.measure = 1.0;
    const auto& c = mesh.cells[f.cell[0]];
    f.normal = Vec2(f.local[0] == 1 ? 1.0 : -1.0, 0.0);
    (void)c;
    return;
  }
  const auto& c = mesh.cells[f.cell[0]];
  const int k = f.local[0];
  const Vec2 a = mesh.vertex(c[(k + 1) % 3]);
  const Vec2 b = mesh.vertex(c[(k + 2) % 3]);
  const Vec2 t = b - a;
  f.measure = t.norm();
  f.normal = Vec2(t.y(), -t.x()) / f.measure;
}

int orient(const Vec2& a, const Vec2& b, const Vec2& c) {
  const double v = cross(b - a, c - a);
  return (v > 0) - (v < 0);
}

bool on_segment(const Vec2& a, const Vec2& b, const Vec2& p) {
  return std::min(a.x(), b.x()) <= p.x() && p.x() <= std::max(a.x(), b.x()) &&
         std::min(a.y(), b.y()) <= p.y() && p.y() <= std::max(a.y(), b.y());
}

bool segments_intersect(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2) {
  const int o1 = orient(p1, p2, q1), o2 = orient(p1, p2, q2);
  const int o3 = orient(q1, q2, p1), o4 = orient(q1, q2, p2);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(p1, p2, q1)) return true;
  if (o2 == 0 && on_segment(p1, p2, q2)) return true;
  if (o3 == 0 && on_segment(q1, q2, p1)) return true;
  if (o4 == 0 && on_segment(q1, q2, p2)) return true;
  return false;
}

}  // namespace

double Mesh::signed_area(int c) const {
  const auto& v = cells[c];
  if (dim == 1) return vertices(0, v[1]) - vertices(0, v[0]);
  return 0.5 * cross(vertex(v[1]) - vertex(v[0]), vertex(v[2]) - vertex(v[0]));
}

Vec2 Mesh::centroid(int c) const {
  const auto& v = cells[c];
  if (dim == 1) return 0.5 * (vertex(v[0]) + vertex(v[1]));
  return (vertex(v[0]) + vertex(v[1]) + vertex(v[2])) / 3.0;
}

double Mesh::diameter(int c) const {
  const auto& v = cells[c];
  if (dim == 1) return std::abs(vertices(0, v[1]) - vertices(0, v[0]));
  return std::max({(vertex(v[0]) - vertex(v[1])).norm(), (vertex(v[1]) - vertex(v[2])).norm(),
                   (vertex(v[2]) - vertex(v[0])).norm()});
}

Mat2 Mesh::jacobian(int c) const {
  const auto& v = cells[c];
  Mat2 J = Mat2::Zero();
  if (dim == 1) {
    J(0, 0) = vertices(0, v[1]) - vertices(0, v[0]);
    J(1, 1) = 1.0;
    return J;
  }
  J.col(0) = vertex(v[1]) - vertex(v[0]);
  J.col(1) = vertex(v[2]) - vertex(v[0]);
  return J;
}

std::vector<Tag> Mesh::vertex_tags() const {
  std::vector<Tag> out(n_vertices(), Tag::None);
  auto rank = [](Tag t) {
    switch (t) {
      case Tag::Shore: return 3;
      case Tag::OpenSea: return 2;
      case Tag::Interface: return 1;
      default: return 0;
    }
  };
  for (const auto& f : facets) {
    if (f.tag == Tag::None) continue;
    for (int v : f.vert)
      if (v >= 0 && rank(f.tag) > rank(out[v])) out[v] = f.tag;
  }
  return out;
}

void build_facets(Mesh& mesh, const BoundaryTagMap& tags) {
  std::map<std::array<int, 2>, Tag> tag_of;
  for (size_t i = 0; i < tags.keys.size(); ++i) {
    const auto& k = tags.keys[i];
    tag_of[k[1] < 0 ? k : sorted_key(k[0], k[1])] = tags.tags[i];
  }
  mesh.facets.clear();
  const int nloc = mesh.dim == 1 ? 2 : 3;
  mesh.cell_facets.assign(mesh.n_cells(), {-1, -1, -1});
  std::map<std::array<int, 2>, int> seen;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const auto& v = mesh.cells[c];
    for (int k = 0; k < nloc; ++k) {
      std::array<int, 2> key;
      std::array<int, 2> fv;
      if (mesh.dim == 1) {
        key = {v[k], -1};
        fv = {v[k], -1};
      } else {
        fv = {v[(k + 1) % 3], v[(k + 2) % 3]};
        key = sorted_key(fv[0], fv[1]);
      }
      auto it = seen.find(key);
      if (it == seen.end()) {
        Facet f;
        f.cell = {c, -1};
        f.local = {k, -1};
        f.vert = fv;
        seen[key] = mesh.n_facets();
        mesh.cell_facets[c][k] = mesh.n_facets();
        mesh.facets.push_back(f);
      } else {
        Facet& f = mesh.facets[it->second];
        if (f.cell[1] >= 0) throw MeshError("facet shared by more than two cells");
        f.cell[1] = c;
        f.local[1] = k;
        mesh.cell_facets[c][k] = it->second;
      }
    }
  }
  for (auto& [key, id] : seen) {
    Facet& f = mesh.facets[id];
    if (f.boundary()) {
      auto it = tag_of.find(key);
      if (it == tag_of.end() || it->second == Tag::None) {
        std::ostringstream os;
        os << "untagged boundary facet at vertex " << key[0];
        throw MeshError("tagging error: " + os.str());
      }
      f.tag = it->second;
      continue;
    }
    const Region r0 = mesh.regions[f.cell[0]], r1 = mesh.regions[f.cell[1]];
    if (r0 == r1) {
      f.tag = Tag::None;
      if (mesh.dim == 1 && f.local[0] == 0) {
        std::swap(f.cell[0], f.cell[1]);
        std::swap(f.local[0], f.local[1]);
      }
      continue;
    }
    f.tag = Tag::Interface;
    if (r0 != Region::Obstacle) {
      std::swap(f.cell[0], f.cell[1]);
      std::swap(f.local[0], f.local[1]);
      if (mesh.dim == 2) std::swap(f.vert[0], f.vert[1]);
    }
  }
  recompute_geometry(mesh);
}

void recompute_geometry(Mesh& mesh) {
  for (auto& f : mesh.facets) facet_geometry(mesh, f);
}

Mesh build_interval(int n_cells, double length) {
  if (n_cells < 1) throw Error("argument error: build_interval needs n_cells >= 1");
  if (!(length > 0)) throw Error("argument error: build_interval needs length > 0");
  Mesh m;
  m.dim = 1;
  m.vertices = Eigen::Matrix2Xd::Zero(2, n_cells + 1);
  for (int i = 0; i <= n_cells; ++i) m.vertices(0, i) = length * i / n_cells;
  m.vertices(0, n_cells) = length;
  for (int i = 0; i < n_cells; ++i) m.cells.push_back({i, i + 1, -1});
  m.regions.assign(n_cells, Region::OmegaTilde);
  BoundaryTagMap tags;
  tags.keys = {{0, -1}, {n_cells, -1}};
  tags.tags = {Tag::Shore, Tag::Shore};
  build_facets(m, tags);
  return m;
}

Mesh apply_displacement(const Mesh& mesh, const Displacement& W, double step) {
  if (W.cols() != mesh.n_vertices()) throw Error("displacement size mismatch");
  Mesh out = mesh;
  out.vertices += step * W;
  if (out.dim == 1) out.vertices.row(1).setZero();
  recompute_geometry(out);
  return out;
}

ValidityReport validate_mesh(const Mesh& mesh) {
  ValidityReport rep;
  for (int c = 0; c < mesh.n_cells(); ++c)
    if (!(mesh.signed_area(c) > 0.0)) rep.inverted_cells.push_back(c);
  if (mesh.dim == 2) {
    std::vector<int> gamma;
    for (int f = 0; f < mesh.n_facets(); ++f)
      if (mesh.facets[f].tag == Tag::Interface) gamma.push_back(f);
    for (size_t i = 0; i < gamma.size(); ++i) {
      const Facet& a = mesh.facets[gamma[i]];
      for (size_t j = i + 1; j < gamma.size(); ++j) {
        const Facet& b = mesh.facets[gamma[j]];
        if (a.vert[0] == b.vert[0] || a.vert[0] == b.vert[1] || a.vert[1] == b.vert[0] ||
            a.vert[1] == b.vert[1])
          continue;
        if (segments_intersect(mesh.vertex(a.vert[0]), mesh.vertex(a.vert[1]), mesh.vertex(b.vert[0]),
                               mesh.vertex(b.vert[1])))
          rep.intersecting_facets.push_back({gamma[i], gamma[j]});
      }
    }
  }
  return rep;
}

std::vector<Polyline> interface_loops(const Mesh& mesh) {
  std::unordered_map<int, int> next_facet;
  for (int f = 0; f < mesh.n_facets(); ++f) {
    const Facet& fc = mesh.facets[f];
    if (fc.tag != Tag::Interface) continue;
    if (next_facet.count(fc.vert[0])) throw MeshError("interface polyline branches at a vertex");
    next_facet[fc.vert[0]] = f;
  }
  std::vector<Polyline> loops;
  std::vector<char> used(mesh.n_facets(), 0);
  std::vector<int> starts;
  for (auto& [v, f] : next_facet) starts.push_back(f);
  std::sort(starts.begin(), starts.end());
  for (int f0 : starts) {
    if (used[f0]) continue;
    Polyline pl;
    int f = f0;
    while (!used[f]) {
      used[f] = 1;
      pl.verts.push_back(mesh.facets[f].vert[0]);
      pl.facets.push_back(f);
      auto it = next_facet.find(mesh.facets[f].vert[1]);
      if (it == next_facet.end()) throw MeshError("open interface polyline");
      f = it->second;
    }
    if (f != f0) throw MeshError("open interface polyline");
    loops.push_back(std::move(pl));
  }
  return loops;
}

double total_area(const Mesh& mesh) {
  double a = 0;
  for (int c = 0; c < mesh.n_cells(); ++c) a += mesh.area(c);
  return a;
}

double region_area(const Mesh& mesh, Region r) {
  double a = 0;
  for (int c = 0; c < mesh.n_cells(); ++c)
    if (mesh.regions[c] == r) a += mesh.area(c);
  return a;
}

double tagged_length(const Mesh& mesh, Tag t) {
  double l = 0;
  for (const auto& f : mesh.facets)
    if (f.tag == t) l += f.measure;
  return l;
}

double boundary_polygon_area(const Mesh& mesh) {
  if (mesh.dim == 1) {
    double lo = mesh.vertices.row(0).minCoeff(), hi = mesh.vertices.row(0).maxCoeff();
    return hi - lo;
  }
  double a = 0;
  for (const auto& f : mesh.facets) {
    if (!f.boundary()) continue;
    const auto& c = mesh.cells[f.cell[0]];
    const Vec2 p = mesh.vertex(c[(f.local[0] + 1) % 3]);
    const Vec2 q = mesh.vertex(c[(f.local[0] + 2) % 3]);
    a += 0.5 * cross(p, q);
  }
  return a;
}

Eigen::Vector3d barycentric(const Mesh& mesh, int cell, const Vec2& p) {
  const auto& v = mesh.cells[cell];
  if (mesh.dim == 1) {
    const double x0 = mesh.vertices(0, v[0]), x1 = mesh.vertices(0, v[1]);
    const double t = (p.x() - x0) / (x1 - x0);
    return Eigen::Vector3d(1 - t, t, 0);
  }
  const Mat2 J = mesh.jacobian(cell);
  const Vec2 xi = J.inverse() * (p - mesh.vertex(v[0]));
  return Eigen::Vector3d(1 - xi.x() - xi.y(), xi.x(), xi.y());
}

int locate_point(const Mesh& mesh, const Vec2& p, Eigen::Vector3d* bary) {
  int best = -1;
  double best_min = -1e300;
  const int nv = mesh.verts_per_cell();
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const Eigen::Vector3d b = barycentric(mesh, c, p);
    const double mn = b.head(nv).minCoeff();
    if (mn > best_min) {
      best_min = mn;
      best = c;
      if (mn >= 0) break;
    }
  }
  if (bary && best >= 0) *bary = barycentric(mesh, best, p);
  return best_min >= -1e-12 ? best : -1;
}

// ---- MSH v2.2 ASCII ----

Mesh load_msh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MeshError("parse error: cannot open " + path);
  std::string line;
  int lineno = 0;
  auto next = [&](const char* what) {
    if (!std::getline(in, line)) throw MeshError("parse error: unexpected end of file, expected " + std::string(what));
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
  };
  auto fail = [&](const std::string& msg) -> MeshError {
    return MeshError("parse error at line " + std::to_string(lineno) + ": " + msg);
  };

  std::unordered_map<long, int> node_index;
  std::vector<Vec2> nodes;
  std::vector<std::array<int, 3>> tris;
  std::vector<Region> regions;
  BoundaryTagMap btags;
  bool have_format = false;

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line == "$MeshFormat") {
      next("format line");
      std::istringstream is(line);
      std::string ver;
      int ftype = -1;
      is >> ver >> ftype;
      if (ver.rfind("2.2", 0) != 0) throw fail("unsupported MSH version '" + ver + "'");
      if (ftype != 0) throw fail("binary MSH is not supported");
      next("$EndMeshFormat");
      if (line != "$EndMeshFormat") throw fail("expected $EndMeshFormat");
      have_format = true;
    } else if (line == "$PhysicalNames") {
      next("count");
      const int n = std::stoi(line);
      for (int i = 0; i < n; ++i) next("physical name");
      next("$EndPhysicalNames");
      if (line != "$EndPhysicalNames") throw fail("expected $EndPhysicalNames");
    } else if (line == "$Nodes") {
      next("node count");
      long n = 0;
      try {
        n = std::stol(line);
      } catch (...) {
        throw fail("bad node count");
      }
      for (long i = 0; i < n; ++i) {
        next("node");
        std::istringstream is(line);
        long id;
        double x, y, z;
        if (!(is >> id >> x >> y >> z)) throw fail("malformed node record");
        node_index[id] = static_cast<int>(nodes.size());
        nodes.emplace_back(x, y);
      }
      next("$EndNodes");
      if (line != "$EndNodes") throw fail("expected $EndNodes");
    } else if (line == "$Elements") {
      next("element count");
      long n = 0;
      try {
        n = std::stol(line);
      } catch (...) {
        throw fail("bad element count");
      }
      for (long i = 0; i < n; ++i) {
        next("element");
        std::istringstream is(line);
        long id;
        int type, ntags;
        if (!(is >> id >> type >> ntags)) throw fail("malformed element record");
        std::vector<long> tg(ntags);
        for (auto& t : tg)
          if (!(is >> t)) throw fail("malformed element tags");
        const int nn = type == 1 ? 2 : type == 2 ? 3 : type == 15 ? 1 : -1;
        if (nn < 0) throw fail("unsupported element type " + std::to_string(type));
        std::array<int, 3> vs{-1, -1, -1};
        for (int k = 0; k < nn; ++k) {
          long nid;
          if (!(is >> nid)) throw fail("malformed element node list");
          auto it = node_index.find(nid);
          if (it == node_index.end()) throw fail("element references unknown node " + std::to_string(nid));
          vs[k] = it->second;
        }
        if (type == 15) continue;
        if (ntags < 1) throw MeshError("tagging error at line " + std::to_string(lineno) + ": element without physical group");
        const long phys = tg[0];
        if (type == 2) {
          if (phys != 10 && phys != 20)
            throw MeshError("tagging error at line " + std::to_string(lineno) + ": surface physical group " +
                            std::to_string(phys) + " is not 10 or 20");
          tris.push_back(vs);
          regions.push_back(phys == 10 ? Region::OmegaTilde : Region::Obstacle);
        } else {
          if (phys < 1 || phys > 3)
            throw MeshError("tagging error at line " + std::to_string(lineno) + ": line physical group " +
                            std::to_string(phys) + " is not 1, 2 or 3");
          btags.keys.push_back({vs[0], vs[1]});
          btags.tags.push_back(static_cast<Tag>(phys));
        }
      }
      next("$EndElements");
      if (line != "$EndElements") throw fail("expected $EndElements");
    }
  }
  if (!have_format) throw MeshError("parse error: missing $MeshFormat section");
  if (tris.empty()) throw MeshError("tagging error: no surface elements in physical groups 10/20");

  Mesh m;
  m.dim = 2;
  m.vertices.resize(2, static_cast<long>(nodes.size()));
  for (size_t i = 0; i < nodes.size(); ++i) m.vertices.col(static_cast<long>(i)) = nodes[i];
  m.cells = tris;
  m.regions = regions;
  for (int c = 0; c < m.n_cells(); ++c)
    if (!(m.signed_area(c) > 0.0))
      throw MeshError("geometry error: cell " + std::to_string(c) + " is clockwise or degenerate");
  build_facets(m, btags);
  return m;
}

void write_msh(const Mesh& mesh, const std::string& path) {
  if (mesh.dim != 2) throw Error("write_msh supports 2D meshes only");
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out.precision(17);
  out << "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n";
  out << "$Nodes\n" << mesh.n_vertices() << "\n";
  for (int i = 0; i < mesh.n_vertices(); ++i)
    out << i + 1 << " " << mesh.vertices(0, i) << " " << mesh.vertices(1, i) << " 0\n";
  out << "$EndNodes\n";
  std::vector<std::string> lines;
  int id = 1;
  std::ostringstream body;
  for (const auto& f : mesh.facets) {
    if (f.tag == Tag::None) continue;
    const int t = static_cast<int>(f.tag);
    body << id++ << " 1 2 " << t << " " << t << " " << f.vert[0] + 1 << " " << f.vert[1] + 1 << "\n";
  }
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const int r = static_cast<int>(mesh.regions[c]);
    const auto& v = mesh.cells[c];
    body << id++ << " 2 2 " << r << " " << r << " " << v[0] + 1 << " " << v[1] + 1 << " " << v[2] + 1 << "\n";
  }
  out << "$Elements\n" << id - 1 << "\n" << body.str() << "$EndElements\n";
}

}  // namespace swopt

namespace swopt {

Eigen::Matrix<double, 2, 3> p1_gradients(const Mesh& mesh, int cell) {
  Eigen::Matrix<double, 2, 3> ref;
  if (mesh.dim == 1) {
    ref << -1, 1, 0, 0, 0, 0;
  } else {
    ref << -1, 1, 0, -1, 0, 1;
  }
  return mesh.jacobian(cell).inverse().transpose() * ref;
}

std::vector<std::vector<int>> vertex_cells(const Mesh& mesh) {
  std::vector<std::vector<int>> out(mesh.n_vertices());
  for (int c = 0; c < mesh.n_cells(); ++c)
    for (int a = 0; a < mesh.verts_per_cell(); ++a) out[mesh.cells[c][a]].push_back(c);
  return out;
}

}  // namespace swopt
