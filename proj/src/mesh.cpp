#include "eit/mesh.hpp"

#include "eit/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace eit {

namespace {

double cross(const Point& a, const Point& b) { return a.x() * b.y() - a.y() * b.x(); }

double orient(const Point& a, const Point& b, const Point& c) { return cross(b - a, c - a); }

bool segments_intersect(const Point& p1, const Point& p2, const Point& q1, const Point& q2,
                        double tol) {
  const double d1 = orient(q1, q2, p1);
  const double d2 = orient(q1, q2, p2);
  const double d3 = orient(p1, p2, q1);
  const double d4 = orient(p1, p2, q2);
  if (((d1 > tol && d2 < -tol) || (d1 < -tol && d2 > tol)) &&
      ((d3 > tol && d4 < -tol) || (d3 < -tol && d4 > tol))) {
    return true;
  }
  auto on_segment = [tol](const Point& a, const Point& b, const Point& p) {
    if (std::abs(orient(a, b, p)) > tol) return false;
    return p.x() >= std::min(a.x(), b.x()) - tol && p.x() <= std::max(a.x(), b.x()) + tol &&
           p.y() >= std::min(a.y(), b.y()) - tol && p.y() <= std::max(a.y(), b.y()) + tol;
  };
  return on_segment(q1, q2, p1) || on_segment(q1, q2, p2) || on_segment(p1, p2, q1) ||
         on_segment(p1, p2, q2);
}

std::uint64_t edge_key(int a, int b) {
  const auto lo = static_cast<std::uint64_t>(std::min(a, b));
  const auto hi = static_cast<std::uint64_t>(std::max(a, b));
  return (lo << 32) | hi;
}

double triangle_min_angle(const Point& a, const Point& b, const Point& c) {
  auto angle = [](const Point& p, const Point& q, const Point& r) {
    const Point u = q - p;
    const Point v = r - p;
    return std::atan2(std::abs(cross(u, v)), u.dot(v));
  };
  return std::min({angle(a, b, c), angle(b, c, a), angle(c, a, b)});
}

bool point_in_triangle_closed(const Point& p, const Point& a, const Point& b, const Point& c,
                              double tol) {
  return orient(a, b, p) >= -tol && orient(b, c, p) >= -tol && orient(c, a, p) >= -tol;
}

}  // namespace

// ---------------------------------------------------------------------------
// Polygon

double Polygon::signed_area() const {
  double a = 0.0;
  const size_t n = vertices.size();
  for (size_t i = 0; i < n; ++i) a += cross(vertices[i], vertices[(i + 1) % n]);
  return 0.5 * a;
}

double Polygon::perimeter() const {
  double p = 0.0;
  const size_t n = vertices.size();
  for (size_t i = 0; i < n; ++i) p += (vertices[(i + 1) % n] - vertices[i]).norm();
  return p;
}

bool Polygon::contains(const Point& p) const {
  bool inside = false;
  const size_t n = vertices.size();
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point& a = vertices[i];
    const Point& b = vertices[j];
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x = (b.x() - a.x()) * (p.y() - a.y()) / (b.y() - a.y()) + a.x();
      if (p.x() < x) inside = !inside;
    }
  }
  return inside;
}

Point Polygon::closest_boundary_point(const Point& p) const {
  Point best = vertices.front();
  double best_d = std::numeric_limits<double>::infinity();
  const size_t n = vertices.size();
  for (size_t i = 0; i < n; ++i) {
    const Point& a = vertices[i];
    const Point& b = vertices[(i + 1) % n];
    const Point ab = b - a;
    const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
    const Point q = a + t * ab;
    const double d = (p - q).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = q;
    }
  }
  return best;
}

void Polygon::validate() const {
  const size_t n = vertices.size();
  if (n < 3) throw ValidationError("polygon needs at least 3 vertices, got " + std::to_string(n));
  double scale = 0.0;
  for (const auto& v : vertices) {
    if (!v.allFinite()) throw ValidationError("polygon has a non-finite vertex");
    scale = std::max(scale, v.cwiseAbs().maxCoeff());
  }
  scale = std::max(scale, 1.0);
  const double tol = 1e-12 * scale;
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      if ((vertices[i] - vertices[j]).norm() <= tol) {
        throw ValidationError("polygon has repeated vertices " + std::to_string(i) + " and " +
                              std::to_string(j));
      }
    }
  }
  const double area = signed_area();
  if (std::abs(area) <= 1e-12 * scale * scale) throw ValidationError("polygon has zero area");
  if (area < 0.0) throw ValidationError("polygon is clockwise; vertices must be counterclockwise");
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      if (j == i + 1 || (i == 0 && j == n - 1)) continue;  // adjacent edges share a vertex
      if (segments_intersect(vertices[i], vertices[(i + 1) % n], vertices[j], vertices[(j + 1) % n],
                             tol * scale)) {
        throw ValidationError("polygon is self-intersecting (edges " + std::to_string(i) + " and " +
                              std::to_string(j) + ")");
      }
    }
  }
}

Polygon Polygon::unit_square() {
  return Polygon{{Point(0, 0), Point(1, 0), Point(1, 1), Point(0, 1)}};
}

// ---------------------------------------------------------------------------
// TriMesh

TriMesh::TriMesh(std::vector<Point> vertices, std::vector<Triangle> triangles, int level)
    : vertices_(std::move(vertices)), triangles_(std::move(triangles)), level_(level) {
  for (const auto& t : triangles_) {
    for (int v : t) {
      if (v < 0 || v >= num_vertices()) throw ValidationError("triangle references vertex out of range");
    }
  }
  for (int t = 0; t < num_triangles(); ++t) {
    if (!(area(t) > 0.0)) {
      throw ValidationError("triangle " + std::to_string(t) + " is degenerate or clockwise");
    }
  }
  build_boundary();
}

double TriMesh::area(int t) const {
  const auto& tri = triangle(t);
  return 0.5 * orient(vertex(tri[0]), vertex(tri[1]), vertex(tri[2]));
}

double TriMesh::total_area() const {
  double a = 0.0;
  for (int t = 0; t < num_triangles(); ++t) a += area(t);
  return a;
}

double TriMesh::boundary_length() const {
  double l = 0.0;
  for (const auto& e : boundary_) l += e.length;
  return l;
}

std::vector<int> TriMesh::boundary_vertices() const {
  std::vector<int> out;
  out.reserve(boundary_.size());
  for (const auto& e : boundary_) out.push_back(e.v0);
  return out;
}

void TriMesh::build_boundary() {
  // Directed edges whose reverse is absent lie on the boundary; with
  // counterclockwise triangles they already run counterclockwise.
  std::unordered_map<std::uint64_t, int> count;
  count.reserve(triangles_.size() * 3);
  for (const auto& t : triangles_) {
    for (int k = 0; k < 3; ++k) ++count[edge_key(t[k], t[(k + 1) % 3])];
  }
  std::map<int, std::pair<int, int>> next;  // start vertex -> (end vertex, triangle)
  for (int ti = 0; ti < num_triangles(); ++ti) {
    const auto& t = triangles_[static_cast<size_t>(ti)];
    for (int k = 0; k < 3; ++k) {
      const int a = t[k];
      const int b = t[(k + 1) % 3];
      const int c = count[edge_key(a, b)];
      if (c > 2) throw ValidationError("edge shared by more than two triangles");
      if (c == 1) {
        if (next.count(a)) throw ValidationError("boundary is not a single simple loop");
        next[a] = {b, ti};
      }
    }
  }
  boundary_.clear();
  if (next.empty()) throw ValidationError("mesh has no boundary");
  const int start = next.begin()->first;
  int v = start;
  do {
    auto it = next.find(v);
    if (it == next.end()) throw ValidationError("boundary loop is open");
    BoundaryEdge e;
    e.v0 = v;
    e.v1 = it->second.first;
    e.triangle = it->second.second;
    boundary_.push_back(e);
    v = e.v1;
    if (boundary_.size() > next.size()) throw ValidationError("boundary loop does not close");
  } while (v != start);
  if (boundary_.size() != next.size()) {
    throw ValidationError("boundary has more than one loop (holes are not supported)");
  }
  set_boundary_geometry();
}

void TriMesh::set_boundary_geometry() {
  double arc = 0.0;
  for (auto& e : boundary_) {
    const Point d = vertex(e.v1) - vertex(e.v0);
    e.length = d.norm();
    e.normal = Point(d.y(), -d.x()) / e.length;
    e.arc_start = arc;
    arc += e.length;
  }
}

// ---------------------------------------------------------------------------
// Construction and refinement

TriMesh build_initial_triangulation(const Polygon& polygon) {
  polygon.validate();
  const auto& P = polygon.vertices;
  const int n = static_cast<int>(P.size());
  double scale = 1.0;
  for (const auto& v : P) scale = std::max(scale, v.cwiseAbs().maxCoeff());
  const double tol = 1e-13 * scale * scale;

  std::vector<int> ring(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) ring[static_cast<size_t>(i)] = i;
  std::vector<TriMesh::Triangle> tris;

  while (ring.size() > 3) {
    const int m = static_cast<int>(ring.size());
    int best = -1;
    double best_quality = -1.0;
    for (int i = 0; i < m; ++i) {
      const int ip = ring[static_cast<size_t>((i + m - 1) % m)];
      const int ic = ring[static_cast<size_t>(i)];
      const int in = ring[static_cast<size_t>((i + 1) % m)];
      if (orient(P[ip], P[ic], P[in]) <= tol) continue;  // reflex or flat
      bool ear = true;
      for (int j = 0; j < m && ear; ++j) {
        const int v = ring[static_cast<size_t>(j)];
        if (v == ip || v == ic || v == in) continue;
        if (point_in_triangle_closed(P[v], P[ip], P[ic], P[in], tol)) ear = false;
      }
      if (!ear) continue;
      const double q = triangle_min_angle(P[ip], P[ic], P[in]);
      if (q > best_quality + 1e-12) {
        best_quality = q;
        best = i;
      }
    }
    if (best < 0) throw ValidationError("ear clipping failed: polygon is not simple");
    const int ip = ring[static_cast<size_t>((best + m - 1) % m)];
    const int ic = ring[static_cast<size_t>(best)];
    const int in = ring[static_cast<size_t>((best + 1) % m)];
    tris.push_back({ip, ic, in});
    ring.erase(ring.begin() + best);
  }
  if (orient(P[ring[0]], P[ring[1]], P[ring[2]]) <= tol) {
    throw ValidationError("ear clipping left a degenerate triangle");
  }
  tris.push_back({ring[0], ring[1], ring[2]});
  return TriMesh(P, std::move(tris), 0);
}

TriMesh refine(const TriMesh& mesh) {
  std::vector<Point> verts = mesh.vertices();
  std::unordered_map<std::uint64_t, int> mid;
  mid.reserve(static_cast<size_t>(mesh.num_triangles()) * 2);
  auto midpoint = [&](int a, int b) {
    const auto key = edge_key(a, b);
    auto it = mid.find(key);
    if (it != mid.end()) return it->second;
    const int id = static_cast<int>(verts.size());
    verts.push_back(0.5 * (mesh.vertex(a) + mesh.vertex(b)));
    mid.emplace(key, id);
    return id;
  };
  // Boundary midpoints first so that their numbering follows the loop.
  for (const auto& e : mesh.boundary_edges()) midpoint(e.v0, e.v1);

  std::vector<TriMesh::Triangle> tris;
  tris.reserve(static_cast<size_t>(mesh.num_triangles()) * 4);
  for (const auto& t : mesh.triangles()) {
    const int a = t[0], b = t[1], c = t[2];
    const int ab = midpoint(a, b), bc = midpoint(b, c), ca = midpoint(c, a);
    tris.push_back({a, ab, ca});
    tris.push_back({ab, b, bc});
    tris.push_back({ca, bc, c});
    tris.push_back({ab, bc, ca});
  }

  TriMesh out;
  out.vertices_ = std::move(verts);
  out.triangles_ = std::move(tris);
  out.level_ = mesh.level() + 1;

  // Children of boundary edge i are 2i and 2i+1.
  std::unordered_map<std::uint64_t, int> owner;
  owner.reserve(out.triangles_.size() * 3);
  for (int ti = 0; ti < out.num_triangles(); ++ti) {
    const auto& t = out.triangles_[static_cast<size_t>(ti)];
    for (int k = 0; k < 3; ++k) owner[edge_key(t[k], t[(k + 1) % 3])] = ti;
  }
  out.boundary_.reserve(mesh.boundary_edges().size() * 2);
  for (const auto& e : mesh.boundary_edges()) {
    const int m = mid.at(edge_key(e.v0, e.v1));
    BoundaryEdge first, second;
    first.v0 = e.v0;
    first.v1 = m;
    first.triangle = owner.at(edge_key(e.v0, m));
    second.v0 = m;
    second.v1 = e.v1;
    second.triangle = owner.at(edge_key(m, e.v1));
    out.boundary_.push_back(first);
    out.boundary_.push_back(second);
  }
  out.set_boundary_geometry();
  return out;
}

TriMesh refine(const TriMesh& mesh, int times) {
  if (times < 0) throw ValidationError("refinement count must be nonnegative");
  TriMesh out = mesh;
  for (int i = 0; i < times; ++i) out = refine(out);
  return out;
}

MeshQuality mesh_quality(const TriMesh& mesh) {
  MeshQuality q;
  q.h_min = std::numeric_limits<double>::infinity();
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangle(t);
    const Point& a = mesh.vertex(tri[0]);
    const Point& b = mesh.vertex(tri[1]);
    const Point& c = mesh.vertex(tri[2]);
    const double la = (b - c).norm(), lb = (c - a).norm(), lc = (a - b).norm();
    const double hk = std::max({la, lb, lc});
    const double rho = 2.0 * mesh.area(t) / (0.5 * (la + lb + lc));
    q.h = std::max(q.h, hk);
    q.h_min = std::min(q.h_min, hk);
    q.s = std::max(q.s, hk / rho);
  }
  return q;
}

const std::vector<BoundaryEdge>& boundary_triangulation(const TriMesh& mesh) {
  return mesh.boundary_edges();
}

std::string audit_conformity(const TriMesh& mesh) {
  std::ostringstream err;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    if (!(mesh.area(t) > 0.0)) {
      err << "triangle " << t << " has nonpositive area";
      return err.str();
    }
  }
  // Each undirected interior edge appears once in each direction.
  std::map<std::pair<int, int>, int> directed;
  for (const auto& t : mesh.triangles()) {
    for (int k = 0; k < 3; ++k) ++directed[{t[k], t[(k + 1) % 3]}];
  }
  size_t boundary_count = 0;
  for (const auto& [e, c] : directed) {
    if (c != 1) {
      err << "directed edge (" << e.first << "," << e.second << ") appears " << c << " times";
      return err.str();
    }
    if (!directed.count({e.second, e.first})) ++boundary_count;
  }
  if (boundary_count != mesh.boundary_edges().size()) {
    err << "boundary edge count mismatch: " << boundary_count << " vs "
        << mesh.boundary_edges().size();
    return err.str();
  }
  // No vertex may sit in the relative interior of an edge (hanging node).
  double scale = 1.0;
  for (const auto& v : mesh.vertices()) scale = std::max(scale, v.cwiseAbs().maxCoeff());
  const double tol = 1e-12 * scale;
  for (const auto& [e, c] : directed) {
    if (e.first > e.second && directed.count({e.second, e.first})) continue;
    const Point& a = mesh.vertex(e.first);
    const Point& b = mesh.vertex(e.second);
    const Point ab = b - a;
    const double len = ab.norm();
    for (int v = 0; v < mesh.num_vertices(); ++v) {
      if (v == e.first || v == e.second) continue;
      const Point ap = mesh.vertex(v) - a;
      const double t = ap.dot(ab) / (len * len);
      if (t <= 0.0 || t >= 1.0) continue;
      if (std::abs(cross(ab, ap)) / len <= tol) {
        err << "vertex " << v << " hangs on edge (" << e.first << "," << e.second << ")";
        return err.str();
      }
    }
  }
  const auto& loop = mesh.boundary_edges();
  for (size_t i = 0; i < loop.size(); ++i) {
    if (loop[i].v1 != loop[(i + 1) % loop.size()].v0) {
      err << "boundary loop broken after edge " << i;
      return err.str();
    }
  }
  return {};
}

// ---------------------------------------------------------------------------
// Text I/O

void write_mesh(std::ostream& os, const TriMesh& mesh) {
  os << mesh.num_vertices() << ' ' << mesh.num_triangles() << ' ' << mesh.num_boundary_edges()
     << '\n';
  os << std::setprecision(17);
  for (const auto& v : mesh.vertices()) os << v.x() << ' ' << v.y() << '\n';
  for (const auto& t : mesh.triangles()) os << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  for (const auto& e : mesh.boundary_edges()) os << e.v0 << ' ' << e.v1 << '\n';
}

TriMesh read_mesh(std::istream& is, int level) {
  long nv = 0, nt = 0, nb = 0;
  if (!(is >> nv >> nt >> nb) || nv < 3 || nt < 1 || nb < 3) {
    throw ValidationError("mesh file: bad header");
  }
  std::vector<Point> verts(static_cast<size_t>(nv));
  for (auto& v : verts) {
    if (!(is >> v.x() >> v.y())) throw ValidationError("mesh file: truncated vertex list");
  }
  std::vector<TriMesh::Triangle> tris(static_cast<size_t>(nt));
  for (auto& t : tris) {
    if (!(is >> t[0] >> t[1] >> t[2])) throw ValidationError("mesh file: truncated triangle list");
  }
  std::vector<std::pair<int, int>> listed(static_cast<size_t>(nb));
  for (auto& e : listed) {
    if (!(is >> e.first >> e.second)) throw ValidationError("mesh file: truncated boundary list");
  }
  TriMesh mesh(std::move(verts), std::move(tris), level);
  if (static_cast<long>(mesh.num_boundary_edges()) != nb) {
    throw ValidationError("mesh file: boundary edge count does not match triangles");
  }
  for (size_t i = 0; i < listed.size(); ++i) {
    const auto& e = mesh.boundary_edges()[i];
    if (e.v0 != listed[i].first || e.v1 != listed[i].second) {
      throw ValidationError("mesh file: boundary loop order differs from the triangulation");
    }
  }
  return mesh;
}

}  // namespace eit
