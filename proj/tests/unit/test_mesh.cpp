#include "doctest.h"

#include "eit/errors.hpp"
#include "eit/mesh.hpp"

#include <cmath>
#include <sstream>

using namespace eit;

namespace {

Polygon l_shape() {
  return Polygon{{Point(0, 0), Point(2, 0), Point(2, 1), Point(1, 1), Point(1, 2), Point(0, 2)}};
}

Polygon equilateral() {
  return Polygon{{Point(0, 0), Point(1, 0), Point(0.5, std::sqrt(3.0) / 2.0)}};
}

// Inradius of a triangle from Heron's formula: r = area / s.
double inradius_ratio(const Point& a, const Point& b, const Point& c) {
  const double la = (b - c).norm(), lb = (c - a).norm(), lc = (a - b).norm();
  const double s = 0.5 * (la + lb + lc);
  const double area = std::sqrt(s * (s - la) * (s - lb) * (s - lc));
  return std::max({la, lb, lc}) / (2.0 * area / s);
}

}  // namespace

TEST_CASE("unit square triangulates into two triangles") {
  const TriMesh m = build_initial_triangulation(Polygon::unit_square());
  CHECK(m.num_triangles() == 2);
  CHECK(m.num_boundary_edges() == 4);
  CHECK(mesh_quality(m).h == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
  for (const auto& e : boundary_triangulation(m)) CHECK(e.length == doctest::Approx(1.0));
  CHECK(audit_conformity(m).empty());
}

TEST_CASE("equilateral triangle is its own mesh") {
  const Polygon p = equilateral();
  const TriMesh m = build_initial_triangulation(p);
  CHECK(m.num_triangles() == 1);
  const double oracle = inradius_ratio(p.vertices[0], p.vertices[1], p.vertices[2]);
  CHECK(oracle == doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));
  CHECK(mesh_quality(m).s == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("right isosceles triangle quality") {
  const TriMesh m = build_initial_triangulation(Polygon{{Point(0, 0), Point(1, 0), Point(0, 1)}});
  const MeshQuality q = mesh_quality(m);
  CHECK(q.h == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
  CHECK(q.s == doctest::Approx(std::sqrt(2.0) / (2.0 - std::sqrt(2.0))).epsilon(1e-12));
  CHECK(q.s == doctest::Approx(inradius_ratio(Point(0, 0), Point(1, 0), Point(0, 1))).epsilon(1e-12));
}

TEST_CASE("nonconvex L shape") {
  const Polygon p = l_shape();
  const TriMesh m = build_initial_triangulation(p);
  CHECK(m.num_triangles() >= 4);
  CHECK(audit_conformity(m).empty());
  double area = 0.0;
  for (int t = 0; t < m.num_triangles(); ++t) area += m.area(t);
  CHECK(std::abs(area - p.signed_area()) <= 1e-12);
  CHECK(std::abs(area - 3.0) <= 1e-12);
  for (int v = 0; v < static_cast<int>(p.vertices.size()); ++v) CHECK((m.vertex(v) - p.vertices[static_cast<size_t>(v)]).norm() == 0.0);
  CHECK(std::abs(m.boundary_length() - p.perimeter()) <= 1e-12);
}

TEST_CASE("invalid polygons are rejected") {
  CHECK_THROWS_AS(build_initial_triangulation(Polygon{{Point(0, 0), Point(1, 0)}}), ValidationError);
  CHECK_THROWS_AS(build_initial_triangulation(Polygon{{Point(0, 0), Point(1, 0), Point(2, 0)}}), ValidationError);
  CHECK_THROWS_AS(build_initial_triangulation(Polygon{{Point(0, 0), Point(1, 0), Point(1, 0), Point(0, 1)}}),
                  ValidationError);
  // clockwise
  CHECK_THROWS_AS(build_initial_triangulation(Polygon{{Point(0, 0), Point(0, 1), Point(1, 1), Point(1, 0)}}),
                  ValidationError);
  // bow tie
  CHECK_THROWS_AS(build_initial_triangulation(Polygon{{Point(0, 0), Point(1, 1), Point(1, 0), Point(0, 1)}}),
                  ValidationError);
}

TEST_CASE("refinement halves h, keeps s, area, perimeter and edge order") {
  for (const Polygon& p : {Polygon::unit_square(), l_shape(), equilateral()}) {
    TriMesh m = build_initial_triangulation(p);
    const MeshQuality q0 = mesh_quality(m);
    const double area0 = m.total_area();
    const int t0 = m.num_triangles();
    for (int k = 1; k <= 4; ++k) {
      const TriMesh prev = m;
      m = refine(m);
      const MeshQuality q = mesh_quality(m);
      CHECK(m.level() == k);
      CHECK(m.num_triangles() == t0 * (1 << (2 * k)));
      CHECK(std::abs(q.h - q0.h / (1 << k)) <= 1e-12);
      CHECK(std::abs(q.s - q0.s) <= 1e-12 * q0.s);
      CHECK(std::abs(m.total_area() - area0) <= 1e-12);
      CHECK(std::abs(m.boundary_length() - p.perimeter()) <= 1e-12);
      CHECK(audit_conformity(m).empty());
      for (int v = 0; v < prev.num_vertices(); ++v) CHECK(m.vertex(v) == prev.vertex(v));
      for (int e = 0; e < prev.num_boundary_edges(); ++e) {
        const auto& pe = prev.boundary_edges()[static_cast<size_t>(e)];
        CHECK(m.boundary_edges()[static_cast<size_t>(2 * e)].v0 == pe.v0);
        CHECK(m.boundary_edges()[static_cast<size_t>(2 * e + 1)].v1 == pe.v1);
      }
    }
  }
}

TEST_CASE("square refinement counts and edge lengths") {
  const TriMesh m = refine(build_initial_triangulation(Polygon::unit_square()));
  CHECK(m.num_triangles() == 8);
  CHECK(m.num_boundary_edges() == 8);
  for (const auto& e : m.boundary_edges()) CHECK(e.length == doctest::Approx(0.5));
  CHECK(mesh_quality(m).h == doctest::Approx(std::sqrt(2.0) / 2.0).epsilon(1e-14));
}

TEST_CASE("boundary loop is closed, counterclockwise, with outward normals") {
  const TriMesh m = refine(build_initial_triangulation(l_shape()), 2);
  const auto& loop = m.boundary_edges();
  double signed_area = 0.0;
  for (size_t i = 0; i < loop.size(); ++i) {
    CHECK(loop[i].v1 == loop[(i + 1) % loop.size()].v0);
    const Point a = m.vertex(loop[i].v0), b = m.vertex(loop[i].v1);
    signed_area += 0.5 * (a.x() * b.y() - a.y() * b.x());
    // the opposite vertex of the owning triangle lies on the inner side
    const auto& tri = m.triangle(loop[i].triangle);
    for (int v : tri) {
      if (v != loop[i].v0 && v != loop[i].v1) CHECK((m.vertex(v) - a).dot(loop[i].normal) < 0.0);
    }
    CHECK(std::abs(loop[i].normal.norm() - 1.0) <= 1e-14);
  }
  CHECK(signed_area == doctest::Approx(3.0));
}

TEST_CASE("quality is scale invariant") {
  Polygon p = l_shape();
  const double s0 = mesh_quality(refine(build_initial_triangulation(p), 1)).s;
  for (auto& v : p.vertices) v *= 10.0;
  const double s1 = mesh_quality(refine(build_initial_triangulation(p), 1)).s;
  CHECK(std::abs(s0 - s1) <= 1e-12 * s0);
}

TEST_CASE("mesh dump round trip") {
  const TriMesh m = refine(build_initial_triangulation(l_shape()), 2);
  std::stringstream ss;
  write_mesh(ss, m);
  const TriMesh r = read_mesh(ss, m.level());
  REQUIRE(r.num_vertices() == m.num_vertices());
  CHECK(r.num_triangles() == m.num_triangles());
  for (int v = 0; v < m.num_vertices(); ++v) CHECK(r.vertex(v) == m.vertex(v));
  for (int e = 0; e < m.num_boundary_edges(); ++e) {
    CHECK(r.boundary_edges()[static_cast<size_t>(e)].v0 == m.boundary_edges()[static_cast<size_t>(e)].v0);
  }
  std::stringstream bad("3 1 3\n0 0\n1 0\n");
  CHECK_THROWS_AS(read_mesh(bad), ValidationError);
}

TEST_CASE("audit detects a hanging vertex") {
  // Square split into three triangles with a vertex in the middle of the diagonal of one side.
  std::vector<Point> v{Point(0, 0), Point(1, 0), Point(1, 1), Point(0, 1), Point(0.5, 0.5)};
  // Triangles (0,1,4), (1,2,4) and a big triangle (0,2,3) whose edge 0-2 passes through vertex 4.
  bool rejected = false;
  try {
    const TriMesh m(v, {{0, 1, 4}, {1, 2, 4}, {0, 2, 3}});
    rejected = !audit_conformity(m).empty();
  } catch (const ValidationError&) {
    rejected = true;
  }
  CHECK(rejected);
}
