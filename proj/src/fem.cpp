#include "eit/fem.hpp"

#include "eit/errors.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <cmath>

namespace eit {

using Triplet = Eigen::Triplet<double>;

FeSpace::FeSpace(TriMesh mesh) : mesh_(std::make_shared<const TriMesh>(std::move(mesh))) {
  const TriMesh& m = *mesh_;
  const int nv = m.num_vertices();
  const int nt = m.num_triangles();
  const int ne = m.num_boundary_edges();

  boundary_nodes_ = m.boundary_vertices();
  boundary_index_.assign(static_cast<size_t>(nv), -1);
  for (int b = 0; b < ne; ++b) boundary_index_[static_cast<size_t>(boundary_nodes_[static_cast<size_t>(b)])] = b;

  grads_.resize(static_cast<size_t>(nt));
  areas_.resize(static_cast<size_t>(nt));
  std::vector<Triplet> mt;
  mt.reserve(static_cast<size_t>(nt) * 9);
  for (int t = 0; t < nt; ++t) {
    const auto& tri = m.triangle(t);
    const Point& a = m.vertex(tri[0]);
    const Point& b = m.vertex(tri[1]);
    const Point& c = m.vertex(tri[2]);
    const double area = m.area(t);
    Eigen::Matrix<double, 2, 3> g;
    // grad lambda_i = rot90(opposite edge) / (2 area)
    g.col(0) << b.y() - c.y(), c.x() - b.x();
    g.col(1) << c.y() - a.y(), a.x() - c.x();
    g.col(2) << a.y() - b.y(), b.x() - a.x();
    g /= 2.0 * area;
    grads_[static_cast<size_t>(t)] = g;
    areas_[static_cast<size_t>(t)] = area;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) mt.emplace_back(tri[i], tri[j], area / (i == j ? 6.0 : 12.0));
    }
  }
  mass_.resize(nv, nv);
  mass_.setFromTriplets(mt.begin(), mt.end());

  const int nd = 2 * ne;
  std::vector<Triplet> tr, dm, lt, lti;
  tr.reserve(static_cast<size_t>(nd));
  dm.reserve(static_cast<size_t>(nd) * 2);
  bweights_ = Eigen::VectorXd::Zero(ne);
  for (int e = 0; e < ne; ++e) {
    const double len = m.boundary_edges()[static_cast<size_t>(e)].length;
    const int b0 = e;
    const int b1 = (e + 1) % ne;
    tr.emplace_back(2 * e, b0, 1.0);
    tr.emplace_back(2 * e + 1, b1, 1.0);
    Eigen::Matrix2d block;
    block << 2.0, 1.0, 1.0, 2.0;
    block *= len / 6.0;
    Eigen::Matrix2d L = block.llt().matrixL();
    Eigen::Matrix2d Lt = L.transpose();
    Eigen::Matrix2d Ltinv = Lt.inverse();
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        dm.emplace_back(2 * e + i, 2 * e + j, block(i, j));
        if (Lt(i, j) != 0.0) lt.emplace_back(2 * e + i, 2 * e + j, Lt(i, j));
        if (Ltinv(i, j) != 0.0) lti.emplace_back(2 * e + i, 2 * e + j, Ltinv(i, j));
      }
    }
    bweights_[b0] += 0.5 * len;
    bweights_[b1] += 0.5 * len;
  }
  dtrace_.resize(nd, ne);
  dtrace_.setFromTriplets(tr.begin(), tr.end());
  dmass_.resize(nd, nd);
  dmass_.setFromTriplets(dm.begin(), dm.end());
  dmass_lt_.resize(nd, nd);
  dmass_lt_.setFromTriplets(lt.begin(), lt.end());
  dmass_lt_inv_.resize(nd, nd);
  dmass_lt_inv_.setFromTriplets(lti.begin(), lti.end());
  bmass_ = SpMat(dtrace_.transpose() * dmass_ * dtrace_);
}

Eigen::VectorXd FeSpace::dconstant(double c) const { return Eigen::VectorXd::Constant(boundary_dim(), c); }

Eigen::VectorXd FeSpace::restrict_to_boundary(const Eigen::VectorXd& nodal) const {
  if (nodal.size() != num_nodes()) throw ValidationError("nodal vector size does not match the mesh");
  Eigen::VectorXd out(num_boundary_nodes());
  for (int b = 0; b < num_boundary_nodes(); ++b) out[b] = nodal[boundary_nodes_[static_cast<size_t>(b)]];
  return out;
}

Eigen::VectorXd FeSpace::boundary_load(const Eigen::VectorXd& g) const {
  if (g.size() != boundary_dim()) throw ValidationError("boundary function size does not match the mesh");
  const Eigen::VectorXd lb = dtrace_.transpose() * (dmass_ * g);
  Eigen::VectorXd load = Eigen::VectorXd::Zero(num_nodes());
  for (int b = 0; b < num_boundary_nodes(); ++b) load[boundary_nodes_[static_cast<size_t>(b)]] = lb[b];
  return load;
}

double FeSpace::dintegral(const Eigen::VectorXd& g) const {
  double s = 0.0;
  for (int e = 0; e < num_boundary_edges(); ++e) {
    s += 0.5 * mesh_->boundary_edges()[static_cast<size_t>(e)].length * (g[2 * e] + g[2 * e + 1]);
  }
  return s;
}

Eigen::VectorXd FeSpace::dcenter(const Eigen::VectorXd& g) const {
  return g - dconstant(dintegral(g) / mesh_->boundary_length());
}

double FeSpace::dinner(const Eigen::VectorXd& f, const Eigen::VectorXd& g) const {
  return f.dot(dmass_ * g);
}

double FeSpace::dnorm(const Eigen::VectorXd& g) const { return std::sqrt(std::max(0.0, dinner(g, g))); }

// ---------------------------------------------------------------------------

BoundaryFunction BoundaryFunction::from_nodal(const FeSpace& space, const Eigen::VectorXd& boundary_values) {
  if (boundary_values.size() != space.num_boundary_nodes()) {
    throw ValidationError("boundary values size does not match the boundary node count");
  }
  return {space.dtrace() * boundary_values};
}

BoundaryFunction BoundaryFunction::from_edge_values(const FeSpace& space, const Eigen::VectorXd& edge_values) {
  if (edge_values.size() != space.num_boundary_edges()) {
    throw ValidationError("edge values size does not match the boundary edge count");
  }
  Eigen::VectorXd c(space.boundary_dim());
  for (int e = 0; e < space.num_boundary_edges(); ++e) c[2 * e] = c[2 * e + 1] = edge_values[e];
  return {c};
}

BoundaryFunction BoundaryFunction::from_function(const FeSpace& space,
                                                 const std::function<double(const Point&)>& f) {
  Eigen::VectorXd c(space.boundary_dim());
  const auto& edges = space.mesh().boundary_edges();
  for (int e = 0; e < space.num_boundary_edges(); ++e) {
    c[2 * e] = f(space.mesh().vertex(edges[static_cast<size_t>(e)].v0));
    c[2 * e + 1] = f(space.mesh().vertex(edges[static_cast<size_t>(e)].v1));
  }
  if (!c.allFinite()) throw ValidationError("boundary function has non-finite values");
  return {c};
}

double BoundaryFunction::mean(const FeSpace& space) const {
  return space.dintegral(coeffs) / space.mesh().boundary_length();
}

bool BoundaryFunction::zero_mean(const FeSpace& space, double tol) const {
  const double scale = std::max(1.0, space.dnorm(coeffs));
  return std::abs(space.dintegral(coeffs)) <= tol * scale;
}

BoundaryFunction BoundaryFunction::centered(const FeSpace& space) const { return {space.dcenter(coeffs)}; }

// ---------------------------------------------------------------------------

Eigen::VectorXd interpolate(const FeSpace& space, const std::function<double(const Point&)>& f) {
  Eigen::VectorXd v(space.num_nodes());
  for (int i = 0; i < space.num_nodes(); ++i) {
    v[i] = f(space.mesh().vertex(i));
    if (!std::isfinite(v[i])) throw ValidationError("interpolated function is not finite at a vertex");
  }
  return v;
}

SpMat assemble_stiffness(const FeSpace& space, const NodalField& A) {
  if (A.num_nodes() != space.num_nodes()) throw ValidationError("conductivity does not match the mesh");
  const TriMesh& m = space.mesh();
  std::vector<Triplet> trips;
  trips.reserve(static_cast<size_t>(m.num_triangles()) * 9);
  for (int t = 0; t < m.num_triangles(); ++t) {
    const auto& tri = m.triangle(t);
    const auto& g = space.gradients(t);
    const Eigen::Matrix2d Abar = A.mean_over(tri[0], tri[1], tri[2]);
    const Eigen::Matrix3d Ke = space.area(t) * g.transpose() * Abar * g;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) trips.emplace_back(tri[i], tri[j], Ke(i, j));
    }
  }
  SpMat K(space.num_nodes(), space.num_nodes());
  K.setFromTriplets(trips.begin(), trips.end());
  return K;
}

NeumannSolver::NeumannSolver(const FeSpace& space, const NodalField& A)
    : space_(&space), stiffness_(assemble_stiffness(space, A)) {
  const int n = space.num_nodes();
  std::vector<Triplet> trips;
  trips.reserve(static_cast<size_t>(stiffness_.nonZeros() + 2 * space.num_boundary_nodes()));
  for (int k = 0; k < stiffness_.outerSize(); ++k) {
    for (SpMat::InnerIterator it(stiffness_, k); it; ++it) trips.emplace_back(it.row(), it.col(), it.value());
  }
  for (int b = 0; b < space.num_boundary_nodes(); ++b) {
    const int v = space.boundary_nodes()[static_cast<size_t>(b)];
    trips.emplace_back(v, n, space.boundary_weights()[b]);
    trips.emplace_back(n, v, space.boundary_weights()[b]);
  }
  SpMat bordered(n + 1, n + 1);
  bordered.setFromTriplets(trips.begin(), trips.end());
  bordered.makeCompressed();
  lu_ = std::make_shared<Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>>>();
  lu_->compute(bordered);
  if (lu_->info() != Eigen::Success) throw NumericalError("Neumann system factorization failed");
}

Eigen::MatrixXd NeumannSolver::solve_loads(const Eigen::MatrixXd& loads) const {
  const int n = space_->num_nodes();
  if (loads.rows() != n) throw ValidationError("load size does not match the mesh");
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n + 1, loads.cols());
  rhs.topRows(n) = loads;
  Eigen::MatrixXd x = lu_->solve(rhs);
  if (lu_->info() != Eigen::Success || !x.allFinite()) throw NumericalError("Neumann solve failed");
  return x.topRows(n);
}

FemSolution NeumannSolver::solve_load(const Eigen::VectorXd& load, bool require_compatible, double tol) const {
  const double total = load.sum();
  if (require_compatible && std::abs(total) > tol * std::max(1.0, load.norm())) {
    throw ValidationError("Neumann data must have zero mean (total flux " + std::to_string(total) + ")");
  }
  FemSolution sol;
  sol.values = solve_loads(load).col(0);
  // Residual of K v = f - lambda c, lambda = total / sum(c).
  Eigen::VectorXd c = Eigen::VectorXd::Zero(space_->num_nodes());
  for (int b = 0; b < space_->num_boundary_nodes(); ++b) {
    c[space_->boundary_nodes()[static_cast<size_t>(b)]] = space_->boundary_weights()[b];
  }
  const Eigen::VectorXd r = stiffness_ * sol.values - (load - (total / c.sum()) * c);
  sol.residual = r.norm() / std::max(load.norm(), 1e-300);
  if (load.norm() == 0.0) sol.residual = r.norm();
  return sol;
}

FemSolution solve_neumann(const FeSpace& space, const NodalField& A, const BoundaryFunction& g) {
  if (!g.zero_mean(space)) throw ValidationError("Neumann data must have zero boundary mean");
  NeumannSolver solver(space, A);
  return solver.solve_load(space.boundary_load(g.coeffs), false);
}

FemSolution solve_dirichlet(const FeSpace& space, const NodalField& A, const Eigen::VectorXd& boundary_values,
                            const Eigen::VectorXd& f) {
  const int n = space.num_nodes();
  if (boundary_values.size() != space.num_boundary_nodes()) {
    throw ValidationError("Dirichlet data size does not match the boundary node count");
  }
  if (f.size() != n) throw ValidationError("volume load size does not match the mesh");
  const SpMat K = assemble_stiffness(space, A);
  std::vector<int> interior_index(static_cast<size_t>(n), -1);
  int ni = 0;
  for (int v = 0; v < n; ++v) {
    if (space.boundary_index(v) < 0) interior_index[static_cast<size_t>(v)] = ni++;
  }
  Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
  for (int b = 0; b < space.num_boundary_nodes(); ++b) u[space.boundary_nodes()[static_cast<size_t>(b)]] = boundary_values[b];
  FemSolution sol;
  if (ni == 0) {
    sol.values = u;
    return sol;
  }
  const Eigen::VectorXd rhs_full = space.mass() * f - K * u;
  std::vector<Triplet> trips;
  Eigen::VectorXd rhs(ni);
  for (int v = 0; v < n; ++v) {
    const int i = interior_index[static_cast<size_t>(v)];
    if (i >= 0) rhs[i] = rhs_full[v];
  }
  for (int k = 0; k < K.outerSize(); ++k) {
    for (SpMat::InnerIterator it(K, k); it; ++it) {
      const int i = interior_index[static_cast<size_t>(it.row())];
      const int j = interior_index[static_cast<size_t>(it.col())];
      if (i >= 0 && j >= 0) trips.emplace_back(i, j, it.value());
    }
  }
  SpMat Kii(ni, ni);
  Kii.setFromTriplets(trips.begin(), trips.end());
  Eigen::SimplicialLDLT<SpMat> ldlt(Kii);
  if (ldlt.info() != Eigen::Success) throw NumericalError("Dirichlet system factorization failed");
  const Eigen::VectorXd x = ldlt.solve(rhs);
  for (int v = 0; v < n; ++v) {
    const int i = interior_index[static_cast<size_t>(v)];
    if (i >= 0) u[v] = x[i];
  }
  sol.values = u;
  sol.residual = (Kii * x - rhs).norm() / std::max(rhs.norm(), 1e-300);
  if (rhs.norm() == 0.0) sol.residual = (Kii * x - rhs).norm();
  return sol;
}

BoundaryFunction trace(const FeSpace& space, const Eigen::VectorXd& nodal) {
  return BoundaryFunction::from_nodal(space, space.restrict_to_boundary(nodal));
}

BoundaryFunction trace(const FeSpace& space, const FemSolution& u) { return trace(space, u.values); }

double operator_norm(const FeSpace& space, const Eigen::MatrixXd& T) {
  if (T.rows() != space.boundary_dim() || T.cols() != space.boundary_dim()) {
    throw ValidationError("boundary operator has the wrong size");
  }
  // With dmass = L L^T, the norm is the spectral norm of L^T T L^{-T}.
  const Eigen::MatrixXd B = space.dmass_sqrt() * (T * space.dmass_inv_sqrt());
  const double scale = B.norm();
  if (scale == 0.0) return 0.0;
  if ((B - B.transpose()).norm() <= 1e-13 * scale) {
    const Eigen::MatrixXd S = 0.5 * (B + B.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
  }
  Eigen::MatrixXd BtB = Eigen::MatrixXd::Zero(B.cols(), B.cols());
  BtB.selfadjointView<Eigen::Lower>().rankUpdate(B.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(BtB, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

double l2_norm(const FeSpace& space, const Eigen::VectorXd& nodal) {
  return std::sqrt(std::max(0.0, nodal.dot(space.mass() * nodal)));
}

double energy(const SpMat& stiffness, const Eigen::VectorXd& v) { return v.dot(stiffness * v); }

}  // namespace eit
