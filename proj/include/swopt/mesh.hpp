#pragma once

#include "swopt/types.hpp"

#include <array>
#include <string>
#include <vector>

namespace swopt {

enum class Tag : int { None = 0, Shore = 1, OpenSea = 2, Interface = 3 };
enum class Region : int { OmegaTilde = 10, Obstacle = 20 };

struct Facet {
  // cell[0] owns the normal; cell[1] is -1 on the outer boundary.
  // On Interface facets cell[0] is the obstacle cell, so the normal points into OmegaTilde.
  std::array<int, 2> cell{-1, -1};
  std::array<int, 2> local{-1, -1};
  std::array<int, 2> vert{-1, -1};
  Vec2 normal = Vec2::Zero();
  double measure = 0.0;
  Tag tag = Tag::None;

  bool boundary() const { return cell[1] < 0; }
};

struct Mesh {
  int dim = 2;
  Eigen::Matrix2Xd vertices;
  std::vector<std::array<int, 3>> cells;  // 1D cells use the first two entries
  std::vector<Region> regions;
  std::vector<Facet> facets;
  std::vector<std::array<int, 3>> cell_facets;

  int n_cells() const { return static_cast<int>(cells.size()); }
  int n_vertices() const { return static_cast<int>(vertices.cols()); }
  int n_facets() const { return static_cast<int>(facets.size()); }
  int verts_per_cell() const { return dim + 1; }

  Vec2 vertex(int i) const { return vertices.col(i); }
  double signed_area(int c) const;
  double area(int c) const { return signed_area(c); }
  Vec2 centroid(int c) const;
  double diameter(int c) const;
  // affine map x = x0 + J xi from the reference simplex
  Mat2 jacobian(int c) const;

  std::vector<Tag> vertex_tags() const;  // strongest boundary tag touching each vertex
};

// Derives facets, normals and interface tags. boundary_tags maps sorted vertex pairs
// (or single vertices in 1D) to a tag; every outer facet must be present.
struct BoundaryTagMap {
  std::vector<std::array<int, 2>> keys;
  std::vector<Tag> tags;
};
void build_facets(Mesh& mesh, const BoundaryTagMap& tags);
void recompute_geometry(Mesh& mesh);

Mesh load_msh(const std::string& path);
void write_msh(const Mesh& mesh, const std::string& path);

Mesh build_half_circle(double radius, const Vec2& obstacle_center, double obstacle_radius,
                       double target_h);
Mesh build_interval(int n_cells, double length);

using Displacement = Eigen::Matrix2Xd;
Mesh apply_displacement(const Mesh& mesh, const Displacement& W, double step);

struct ValidityReport {
  std::vector<int> inverted_cells;
  std::vector<std::array<int, 2>> intersecting_facets;  // pairs of Interface facet ids
  bool valid() const { return inverted_cells.empty() && intersecting_facets.empty(); }
};
ValidityReport validate_mesh(const Mesh& mesh);

// Interface facets ordered into closed loops; loop vertices run counterclockwise around D.
struct Polyline {
  std::vector<int> verts;
  std::vector<int> facets;  // facets[i] joins verts[i] and verts[i+1 mod n]
};
std::vector<Polyline> interface_loops(const Mesh& mesh);

double total_area(const Mesh& mesh);
double region_area(const Mesh& mesh, Region r);
double tagged_length(const Mesh& mesh, Tag t);
// area enclosed by the outer boundary loop(s), computed from the boundary facets
double boundary_polygon_area(const Mesh& mesh);

// index of the cell containing p (barycentric test), -1 if none
int locate_point(const Mesh& mesh, const Vec2& p, Eigen::Vector3d* bary = nullptr);
Eigen::Vector3d barycentric(const Mesh& mesh, int cell, const Vec2& p);

// gradients of the P1 hat functions of a cell (unused third column in 1D)
Eigen::Matrix<double, 2, 3> p1_gradients(const Mesh& mesh, int cell);
// vertex -> cells incidence
std::vector<std::vector<int>> vertex_cells(const Mesh& mesh);

}  // namespace swopt
