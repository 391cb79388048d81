#pragma once

#include <Eigen/Core>

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

namespace eit {

using Point = Eigen::Vector2d;

/// Simple polygon, vertices listed counterclockwise.
struct Polygon {
  std::vector<Point> vertices;

  double signed_area() const;
  double perimeter() const;
  bool contains(const Point& p) const;
  /// Nearest point of the boundary polyline.
  Point closest_boundary_point(const Point& p) const;
  /// Throws ValidationError on fewer than 3 vertices, repeated vertices,
  /// zero or negative signed area, or self-intersection.
  void validate() const;

  static Polygon unit_square();
};

struct BoundaryEdge {
  int v0 = 0;  ///< start vertex (counterclockwise traversal)
  int v1 = 0;  ///< end vertex
  int triangle = -1;
  Point normal = Point::Zero();  ///< outward unit normal
  double length = 0.0;
  double arc_start = 0.0;  ///< arc-length position of v0 along the loop
};

struct MeshQuality {
  double h = 0.0;      ///< max triangle diameter
  double s = 0.0;      ///< max h_K / rho_K, rho_K = inscribed-ball diameter
  double h_min = 0.0;  ///< min triangle diameter
};

/// Conforming triangulation of a polygon with its induced boundary loop.
///
/// Refinement keeps coarse vertices at their indices and splits boundary edge
/// i into edges 2i and 2i+1, so boundary edge j at level n lies inside edge
/// j >> (n - n') at any coarser level n'.
class TriMesh {
 public:
  using Triangle = std::array<int, 3>;

  TriMesh() = default;
  /// Boundary edges may be given in any order; they are chained into a
  /// counterclockwise loop starting at the edge whose start vertex is smallest.
  TriMesh(std::vector<Point> vertices, std::vector<Triangle> triangles, int level = 0);

  int num_vertices() const { return static_cast<int>(vertices_.size()); }
  int num_triangles() const { return static_cast<int>(triangles_.size()); }
  int num_boundary_edges() const { return static_cast<int>(boundary_.size()); }
  int level() const { return level_; }

  const std::vector<Point>& vertices() const { return vertices_; }
  const std::vector<Triangle>& triangles() const { return triangles_; }
  const std::vector<BoundaryEdge>& boundary_edges() const { return boundary_; }
  const Point& vertex(int i) const { return vertices_[static_cast<size_t>(i)]; }
  const Triangle& triangle(int t) const { return triangles_[static_cast<size_t>(t)]; }

  /// Signed area of triangle t (positive for counterclockwise).
  double area(int t) const;
  double total_area() const;
  double boundary_length() const;
  /// Boundary vertices in loop order (one per boundary edge start).
  std::vector<int> boundary_vertices() const;

 private:
  friend TriMesh refine(const TriMesh& mesh);
  void build_boundary();
  void set_boundary_geometry();

  std::vector<Point> vertices_;
  std::vector<Triangle> triangles_;
  std::vector<BoundaryEdge> boundary_;
  int level_ = 0;
};

/// Ear-clipping triangulation using only the polygon vertices.
TriMesh build_initial_triangulation(const Polygon& polygon);

/// Red refinement: every triangle split into four by its edge midpoints.
TriMesh refine(const TriMesh& mesh);
TriMesh refine(const TriMesh& mesh, int times);

MeshQuality mesh_quality(const TriMesh& mesh);

/// Boundary loop as stored in the mesh (counterclockwise, arc positions set).
const std::vector<BoundaryEdge>& boundary_triangulation(const TriMesh& mesh);

/// Exhaustive audit: positive areas, consistent orientation, every edge shared
/// by at most two triangles, no hanging vertices, closed boundary loop.
/// Returns an empty string when the mesh passes, a diagnostic otherwise.
std::string audit_conformity(const TriMesh& mesh);

/// Plain-text dump: "V T B", V lines "x y", T lines "i j k", B lines "i j".
void write_mesh(std::ostream& os, const TriMesh& mesh);
TriMesh read_mesh(std::istream& is, int level = 0);

}  // namespace eit
