#include "doctest.h"

#include "eit/errors.hpp"
#include "eit/ntd.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>

using namespace eit;

namespace {

TriMesh square(int level) { return refine(build_initial_triangulation(Polygon::unit_square()), level); }

NodalField smooth(const FeSpace& space) {
  return NodalField::scalar_from(
      interpolate(space, [](const Point& p) { return 1.0 + 0.4 * std::sin(2 * p.x()) * std::cos(3 * p.y()); }), 0.5,
      2.0);
}

}  // namespace

TEST_CASE("NtD map applied to the flux of an affine function") {
  const FeSpace space(square(3));
  const NtDRep n = ntd_assemble(space, NodalField::constant(space.num_nodes(), 2.0, 0.5, 5.0));
  Eigen::VectorXd edge(space.num_boundary_edges());
  for (int e = 0; e < space.num_boundary_edges(); ++e) edge[e] = 2.0 * space.mesh().boundary_edges()[static_cast<size_t>(e)].normal.y();
  const BoundaryFunction g = BoundaryFunction::from_edge_values(space, edge);
  const Eigen::VectorXd f = n.apply(g.coeffs);
  const BoundaryFunction expected = trace(space, interpolate(space, [](const Point& p) { return p.y() - 0.5; }));
  CHECK((f - expected.coeffs).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((n.on_boundary_space() * g.coeffs - f).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("NtD map is symmetric, annihilates constants and scales inversely") {
  const FeSpace space(square(3));
  const NodalField A = smooth(space);
  const NtDRep n = ntd_assemble(space, A);
  CHECK(n.symmetry_defect() <= 1e-10);
  const Eigen::MatrixXd N = n.on_boundary_space();
  CHECK((N * space.dconstant()).cwiseAbs().maxCoeff() <= 1e-12);
  // self-adjoint in L2(boundary)
  const Eigen::MatrixXd MN = Eigen::MatrixXd(space.dmass()) * N;
  CHECK((MN - MN.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * MN.cwiseAbs().maxCoeff());
  const NtDRep n3 = ntd_assemble(space, A.scaled(3.0));
  CHECK((n3.green - n.green / 3.0).cwiseAbs().maxCoeff() <= 1e-10 * n.green.cwiseAbs().maxCoeff());
  CHECK(l2l2_norm(n3) == doctest::Approx(l2l2_norm(n) / 3.0).epsilon(1e-10));
  CHECK(l2l2_distance(n, n) == 0.0);
}

TEST_CASE("L2 norm of the NtD map agrees with the dense operator norm") {
  const FeSpace space(square(2));
  const NtDRep n = ntd_assemble(space, smooth(space));
  CHECK(l2l2_norm(n) == doctest::Approx(operator_norm(space, n.on_boundary_space())).epsilon(1e-10));
}

TEST_CASE("boundary prolongation is exact for edgewise linear functions") {
  const FeSpace coarse(square(1));
  const FeSpace fine(square(3));
  const SpMat P = boundary_prolongation(coarse, fine);
  auto f = [](const Point& p) { return 1.0 + 2 * p.x() - p.y(); };
  const Eigen::VectorXd c = BoundaryFunction::from_function(coarse, f).coeffs;
  const Eigen::VectorXd expected = BoundaryFunction::from_function(fine, f).coeffs;
  CHECK((P * c - expected).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK_THROWS_AS(boundary_prolongation(fine, coarse), ValidationError);
  const FeSpace other(refine(build_initial_triangulation(Polygon{{Point(0, 0), Point(2, 0), Point(2, 1), Point(0, 1)}}), 2));
  CHECK_THROWS_AS(boundary_prolongation(coarse, other), ValidationError);
}

TEST_CASE("transfer of a map onto a finer boundary space preserves its norm") {
  const FeSpace coarse(square(2));
  const FeSpace fine(square(3));
  const NtDRep n = ntd_assemble(coarse, smooth(coarse));
  CHECK(operator_norm(fine, transfer(n, fine)) == doctest::Approx(l2l2_norm(n)).epsilon(1e-9));
}

TEST_CASE("log-log fit") {
  std::vector<double> x, y;
  for (int i = 0; i < 5; ++i) {
    x.push_back(std::pow(2.0, -i));
    y.push_back(3.0 * std::pow(x.back(), 1.5));
  }
  const LogLogFit f = loglog_fit(x, y);
  CHECK(f.slope == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(f.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK_THROWS_AS(loglog_fit({1.0}, {1.0}), ValidationError);
  CHECK_THROWS_AS(loglog_fit({1.0, 2.0}, {1.0, -1.0}), ValidationError);
}

TEST_CASE("homotopy between conductivities") {
  const FeSpace space(square(3));
  const NodalField a1 = NodalField::constant(space.num_nodes(), 1.0, 0.5, 2.0);
  const NodalField a2 = smooth(space);
  const HolderReport r = holder_check(space, a1, a2, {0.0, 0.125, 0.25, 0.5, 1.0});
  CHECK(r.ntd[0] == 0.0);
  CHECK(r.monotone);
  // for small perturbations the map is Lipschitz: slope close to one
  CHECK(r.slope > 0.8);
  CHECK(r.slope < 1.2);
}

TEST_CASE("FEM convergence of the NtD map on a small ladder") {
  const TriMesh base = build_initial_triangulation(Polygon::unit_square());
  const ConvergenceReport r = fem_convergence_check(
      base, [](const Point& p) { return 1.0 + 0.4 * std::sin(2 * p.x()) * std::cos(3 * p.y()); }, 0.5, 2.0,
      {1, 2, 3});
  CHECK(r.reference_level == 5);
  CHECK(r.monotone);
  CHECK(r.slope > 0.5);
  CHECK_THROWS_AS(fem_convergence_check(base, [](const Point&) { return 1.0; }, 0.5, 2.0, {1, 2}), ValidationError);
}
