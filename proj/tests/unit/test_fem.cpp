#include "doctest.h"

#include "quadrature.hpp"

#include "eit/errors.hpp"
#include "eit/fem.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>

using namespace eit;

namespace {

TriMesh square(int level) { return refine(build_initial_triangulation(Polygon::unit_square()), level); }

// Gradients of the barycentric functions from the inverse of [1 x y].
Eigen::Matrix<double, 2, 3> oracle_gradients(const TriMesh& m, int t) {
  Eigen::Matrix3d V;
  for (int k = 0; k < 3; ++k) V.row(k) << 1.0, m.vertex(m.triangle(t)[k]).x(), m.vertex(m.triangle(t)[k]).y();
  const Eigen::Matrix3d C = V.inverse();  // column k: coefficients of lambda_k
  return C.bottomRows(2);
}

}  // namespace

TEST_CASE("interpolation reproduces constants and affine functions") {
  const FeSpace space(square(3));
  const Eigen::VectorXd c = interpolate(space, [](const Point&) { return 3.0; });
  CHECK((c.array() == 3.0).all());
  const Eigen::VectorXd v = interpolate(space, [](const Point& p) { return p.x() + 2.0 * p.y(); });
  const TriMesh& m = space.mesh();
  for (int t = 0; t < m.num_triangles(); ++t) {
    const auto& tri = m.triangle(t);
    const Point g = (m.vertex(tri[0]) + m.vertex(tri[1]) + m.vertex(tri[2])) / 3.0;
    const double interp = (v[tri[0]] + v[tri[1]] + v[tri[2]]) / 3.0;
    CHECK(std::abs(interp - (g.x() + 2.0 * g.y())) <= 1e-12);
  }
  CHECK_THROWS_AS(interpolate(space, [](const Point&) { return std::numeric_limits<double>::quiet_NaN(); }),
                  ValidationError);
}

TEST_CASE("interpolation error of x^2 decays like h^2") {
  std::vector<double> err;
  for (int level = 3; level <= 6; ++level) {
    const FeSpace space(square(level));
    const Eigen::VectorXd v = interpolate(space, [](const Point& p) { return p.x() * p.x(); });
    const double e2 = testing_oracle::integrate(space.mesh(), [&](const Point& x, const Eigen::Vector3d& l, int t) {
      const auto& tri = space.mesh().triangle(t);
      const double ih = l[0] * v[tri[0]] + l[1] * v[tri[1]] + l[2] * v[tri[2]];
      return (x.x() * x.x() - ih) * (x.x() * x.x() - ih);
    });
    err.push_back(std::sqrt(e2));
  }
  for (size_t i = 1; i < err.size(); ++i) {
    const double ratio = err[i - 1] / err[i];
    CHECK(ratio >= 3.5);
    CHECK(ratio <= 4.5);
  }
}

TEST_CASE("stiffness matrix: kernel, symmetry, linearity") {
  const FeSpace space(square(0));
  const NodalField one = NodalField::constant(space.num_nodes(), 1.0, 0.5, 5.0);
  const SpMat K = assemble_stiffness(space, one);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(space.num_nodes());
  CHECK((K * ones).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((Eigen::MatrixXd(K) - Eigen::MatrixXd(K).transpose()).cwiseAbs().maxCoeff() == 0.0);
  const SpMat K3 = assemble_stiffness(space, one.scaled(3.0));
  CHECK((Eigen::MatrixXd(K3) - 3.0 * Eigen::MatrixXd(K)).cwiseAbs().maxCoeff() <= 1e-12);
  const NodalField wrong = NodalField::constant(space.num_nodes() + 1, 1.0, 0.5, 5.0);
  CHECK_THROWS_AS(assemble_stiffness(space, wrong), ValidationError);
}

TEST_CASE("stiffness with a P1 tensor matches seven-point quadrature") {
  const FeSpace space(square(2));
  const TriMesh& m = space.mesh();
  NodalField A;
  A.kind = FieldKind::tensor;
  A.lambda0 = 0.1;
  A.lambda1 = 10.0;
  A.values.resize(space.num_nodes(), 3);
  for (int v = 0; v < space.num_nodes(); ++v) {
    const Point& p = m.vertex(v);
    A.values.row(v) << 1.0 + p.x(), 0.3 * p.y() - 0.1, 2.0 - p.x() * p.y();
  }
  const Eigen::MatrixXd K = Eigen::MatrixXd(assemble_stiffness(space, A));
  Eigen::MatrixXd oracle = Eigen::MatrixXd::Zero(space.num_nodes(), space.num_nodes());
  for (int t = 0; t < m.num_triangles(); ++t) {
    const auto& tri = m.triangle(t);
    const auto g = oracle_gradients(m, t);
    for (const auto& q : testing_oracle::gauss7()) {
      const double l[3] = {q.l0, q.l1, q.l2};
      Eigen::Matrix2d a = Eigen::Matrix2d::Zero();
      for (int k = 0; k < 3; ++k) a += l[k] * A.at(tri[k]);
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) oracle(tri[i], tri[j]) += q.w * m.area(t) * g.col(i).dot(a * g.col(j));
      }
    }
  }
  CHECK((K - oracle).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("Neumann solve reproduces the affine solution x - 1/2") {
  const FeSpace space(square(3));
  Eigen::VectorXd edge(space.num_boundary_edges());
  for (int e = 0; e < space.num_boundary_edges(); ++e) {
    const Point& n = space.mesh().boundary_edges()[static_cast<size_t>(e)].normal;
    edge[e] = n.x();  // flux of u = x
  }
  const BoundaryFunction g = BoundaryFunction::from_edge_values(space, edge);
  CHECK(g.zero_mean(space));
  const NodalField one = NodalField::constant(space.num_nodes(), 1.0, 0.5, 5.0);
  const FemSolution v = solve_neumann(space, one, g);
  for (int i = 0; i < space.num_nodes(); ++i) CHECK(std::abs(v.values[i] - (space.mesh().vertex(i).x() - 0.5)) <= 1e-10);
  CHECK(v.residual <= 1e-10);
  CHECK(std::abs(trace(space, v).mean(space)) <= 1e-10);

  const FemSolution half = solve_neumann(space, one.scaled(2.0), g);
  CHECK((half.values - 0.5 * v.values).cwiseAbs().maxCoeff() <= 1e-10);

  const FemSolution zero = solve_neumann(space, one, BoundaryFunction{Eigen::VectorXd::Zero(space.boundary_dim())});
  CHECK(zero.values.cwiseAbs().maxCoeff() <= 1e-14);

  const BoundaryFunction bad = BoundaryFunction::from_edge_values(space, Eigen::VectorXd::Ones(space.num_boundary_edges()));
  CHECK_THROWS_AS(solve_neumann(space, one, bad), ValidationError);
}

TEST_CASE("Neumann solutions are mean free and satisfy Galerkin orthogonality") {
  const FeSpace space(square(3));
  NodalField A = NodalField::scalar_from(
      interpolate(space, [](const Point& p) { return 1.0 + 0.5 * std::sin(3 * p.x()) * p.y(); }), 0.4, 2.0);
  const BoundaryFunction g =
      BoundaryFunction::from_function(space, [](const Point& p) { return std::cos(4 * p.x()) + p.y() * p.y(); })
          .centered(space);
  const NeumannSolver solver(space, A);
  const FemSolution v = solver.solve_load(space.boundary_load(g.coeffs));
  CHECK(std::abs(trace(space, v).mean(space)) <= 1e-10);
  const Eigen::VectorXd r = solver.stiffness() * v.values - space.boundary_load(g.coeffs);
  CHECK(r.norm() <= 1e-10 * space.boundary_load(g.coeffs).norm());
  // scaling law
  const FemSolution v3 = NeumannSolver(space, A.scaled(3.0)).solve_load(space.boundary_load(g.coeffs));
  CHECK((v3.values - v.values / 3.0).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("Dirichlet solve") {
  const FeSpace space(square(3));
  const NodalField one = NodalField::constant(space.num_nodes(), 1.0, 0.5, 5.0);
  const Eigen::VectorXd zero_f = Eigen::VectorXd::Zero(space.num_nodes());
  auto affine = [](const Point& p) { return 2.0 - p.x() + 3.0 * p.y(); };
  const Eigen::VectorXd exact = interpolate(space, affine);
  const FemSolution u = solve_dirichlet(space, one, space.restrict_to_boundary(exact), zero_f);
  CHECK((u.values - exact).cwiseAbs().maxCoeff() <= 1e-12);
  const FemSolution z = solve_dirichlet(space, one, Eigen::VectorXd::Zero(space.num_boundary_nodes()), zero_f);
  CHECK(z.values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("Dirichlet solution is the energy best approximation") {
  // u = exp(x) cos(y) is harmonic; the discrete solution minimises the energy
  // error among P1 functions with the same boundary values, the interpolant included.
  auto exact = [](const Point& p) { return std::exp(p.x()) * std::cos(p.y()); };
  auto grad = [](const Point& p) { return Point(std::exp(p.x()) * std::cos(p.y()), -std::exp(p.x()) * std::sin(p.y())); };
  double prev = std::numeric_limits<double>::infinity();
  for (int level = 1; level <= 5; ++level) {
    const FeSpace space(square(level));
    const NodalField a = NodalField::constant(space.num_nodes(), 1.0, 0.5, 5.0);
    const Eigen::VectorXd iu = interpolate(space, exact);
    const FemSolution u =
        solve_dirichlet(space, a, space.restrict_to_boundary(iu), Eigen::VectorXd::Zero(space.num_nodes()));
    auto energy_error = [&](const Eigen::VectorXd& v) {
      return testing_oracle::integrate(space.mesh(), [&](const Point& x, const Eigen::Vector3d&, int t) {
        const auto& tri = space.mesh().triangle(t);
        const auto g = oracle_gradients(space.mesh(), t);
        const Point gh = g.col(0) * v[tri[0]] + g.col(1) * v[tri[1]] + g.col(2) * v[tri[2]];
        return (grad(x) - gh).squaredNorm();
      });
    };
    const double eh = energy_error(u.values);
    CHECK(eh <= energy_error(iu) + 1e-12);
    CHECK(eh < prev);
    if (level > 1) {
      const double ratio = prev / eh;  // squared energy error ~ h^2
      CHECK(ratio >= 3.5);
      CHECK(ratio <= 4.5);
    }
    prev = eh;
  }
}

TEST_CASE("trace and boundary means") {
  const FeSpace space(square(2));
  const BoundaryFunction c = trace(space, Eigen::VectorXd::Constant(space.num_nodes(), 2.5));
  CHECK(std::abs(c.mean(space) - 2.5) <= 1e-14);
  // int_{dOmega} x = 0 + 1 + 1/2 + 1/2 = 2 over a perimeter of 4
  const BoundaryFunction x = trace(space, interpolate(space, [](const Point& p) { return p.x(); }));
  CHECK(std::abs(x.mean(space) - 0.5) <= 1e-14);
}

TEST_CASE("boundary space geometry") {
  const FeSpace space(square(2));
  const Eigen::MatrixXd M = Eigen::MatrixXd(space.dmass());
  const Eigen::MatrixXd Lt = Eigen::MatrixXd(space.dmass_sqrt());
  const Eigen::MatrixXd Ltinv = Eigen::MatrixXd(space.dmass_inv_sqrt());
  CHECK((Lt.transpose() * Lt - M).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK((Lt * Ltinv - Eigen::MatrixXd::Identity(M.rows(), M.cols())).cwiseAbs().maxCoeff() <= 1e-13);
  CHECK(space.dintegral(space.dconstant()) == doctest::Approx(4.0));
  // operator norm of the identity and of a scalar multiple
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(space.boundary_dim(), space.boundary_dim());
  CHECK(operator_norm(space, I) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(operator_norm(space, -2.0 * I) == doctest::Approx(2.0).epsilon(1e-12));
}
