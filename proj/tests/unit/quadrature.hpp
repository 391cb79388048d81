#pragma once

// Independent quadrature oracles for the tests.

#include "eit/mesh.hpp"

#include <Eigen/Core>

#include <array>
#include <functional>

namespace testing_oracle {

struct GaussPoint {
  double l0, l1, l2, w;
};

// Seven-point rule on a triangle, exact for polynomials of degree 5.
inline const std::array<GaussPoint, 7>& gauss7() {
  static const double a1 = 0.059715871789770, b1 = 0.470142064105115, w1 = 0.132394152788506;
  static const double a2 = 0.797426985353087, b2 = 0.101286507323456, w2 = 0.125939180544827;
  static const std::array<GaussPoint, 7> pts{{
      {1.0 / 3, 1.0 / 3, 1.0 / 3, 0.225},
      {a1, b1, b1, w1},
      {b1, a1, b1, w1},
      {b1, b1, a1, w1},
      {a2, b2, b2, w2},
      {b2, a2, b2, w2},
      {b2, b2, a2, w2},
  }};
  return pts;
}

// int over the mesh of f(x, barycentric coordinates, triangle).
inline double integrate(const eit::TriMesh& mesh,
                        const std::function<double(const eit::Point&, const Eigen::Vector3d&, int)>& f) {
  double s = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangle(t);
    const eit::Point& a = mesh.vertex(tri[0]);
    const eit::Point& b = mesh.vertex(tri[1]);
    const eit::Point& c = mesh.vertex(tri[2]);
    double acc = 0.0;
    for (const auto& g : gauss7()) {
      acc += g.w * f(g.l0 * a + g.l1 * b + g.l2 * c, Eigen::Vector3d(g.l0, g.l1, g.l2), t);
    }
    s += mesh.area(t) * acc;
  }
  return s;
}

}  // namespace testing_oracle
