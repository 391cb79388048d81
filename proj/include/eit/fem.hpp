#pragma once

#include "eit/field.hpp"
#include "eit/mesh.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <functional>
#include <memory>
#include <vector>

namespace eit {

using SpMat = Eigen::SparseMatrix<double>;

/// P1 space on a triangulation together with its boundary geometry.
///
/// Boundary data live in the space D of edgewise-linear functions on the
/// boundary loop (two coefficients per boundary edge, discontinuous across
/// vertices). D contains the traces of P1 functions and the indicator of
/// every union of boundary edges, so electrode data and nodal traces share
/// one L2 geometry given by the block-diagonal mass matrix dmass().
class FeSpace {
 public:
  explicit FeSpace(TriMesh mesh);

  const TriMesh& mesh() const { return *mesh_; }
  int num_nodes() const { return mesh_->num_vertices(); }
  int num_boundary_nodes() const { return static_cast<int>(boundary_nodes_.size()); }
  int num_boundary_edges() const { return mesh_->num_boundary_edges(); }
  /// Dimension of D.
  int boundary_dim() const { return 2 * num_boundary_edges(); }

  /// Vertex index of boundary node b (loop order: node b starts edge b).
  const std::vector<int>& boundary_nodes() const { return boundary_nodes_; }
  /// Position of a vertex in the boundary loop, -1 for interior vertices.
  int boundary_index(int vertex) const { return boundary_index_[static_cast<size_t>(vertex)]; }

  /// Barycentric gradients of triangle t, one column per local vertex.
  const Eigen::Matrix<double, 2, 3>& gradients(int t) const { return grads_[static_cast<size_t>(t)]; }
  double area(int t) const { return areas_[static_cast<size_t>(t)]; }

  const SpMat& mass() const { return mass_; }
  /// Nodal boundary mass on the boundary nodes (Nb x Nb).
  const SpMat& boundary_mass() const { return bmass_; }
  /// Injection of continuous boundary traces into D (D x Nb).
  const SpMat& dtrace() const { return dtrace_; }
  /// L2 mass matrix of D (block diagonal).
  const SpMat& dmass() const { return dmass_; }
  /// With dmass = L L^T: L^T and L^{-T}, both block diagonal.
  const SpMat& dmass_sqrt() const { return dmass_lt_; }
  const SpMat& dmass_inv_sqrt() const { return dmass_lt_inv_; }
  /// Integral over the boundary of each boundary basis function (Nb).
  const Eigen::VectorXd& boundary_weights() const { return bweights_; }
  /// The constant function 1 in D.
  Eigen::VectorXd dconstant(double c = 1.0) const;

  /// Nodal values on the boundary nodes.
  Eigen::VectorXd restrict_to_boundary(const Eigen::VectorXd& nodal) const;
  /// Load vector over all nodes: entries int_{dOmega} g phi_i for g in D.
  Eigen::VectorXd boundary_load(const Eigen::VectorXd& g) const;
  /// Integral over the boundary of g in D.
  double dintegral(const Eigen::VectorXd& g) const;
  /// g minus its boundary mean.
  Eigen::VectorXd dcenter(const Eigen::VectorXd& g) const;
  double dinner(const Eigen::VectorXd& f, const Eigen::VectorXd& g) const;
  double dnorm(const Eigen::VectorXd& g) const;

 private:
  std::shared_ptr<const TriMesh> mesh_;
  std::vector<int> boundary_nodes_;
  std::vector<int> boundary_index_;
  std::vector<Eigen::Matrix<double, 2, 3>> grads_;
  std::vector<double> areas_;
  SpMat mass_;
  SpMat bmass_;
  SpMat dtrace_;
  SpMat dmass_;
  SpMat dmass_lt_;
  SpMat dmass_lt_inv_;
  Eigen::VectorXd bweights_;
};

/// A boundary function, stored by its coefficients in D.
struct BoundaryFunction {
  Eigen::VectorXd coeffs;

  static BoundaryFunction from_nodal(const FeSpace& space, const Eigen::VectorXd& boundary_values);
  /// One constant per boundary edge.
  static BoundaryFunction from_edge_values(const FeSpace& space, const Eigen::VectorXd& edge_values);
  /// Evaluated at both ends of every boundary edge.
  static BoundaryFunction from_function(const FeSpace& space,
                                        const std::function<double(const Point&)>& f);

  double integral(const FeSpace& space) const { return space.dintegral(coeffs); }
  double mean(const FeSpace& space) const;
  bool zero_mean(const FeSpace& space, double tol = 1e-10) const;
  BoundaryFunction centered(const FeSpace& space) const;
};

struct FemSolution {
  Eigen::VectorXd values;  // one per vertex
  double residual = 0.0;   // relative residual of the linear solve
};

/// Nodal interpolation; rejects non-finite values.
Eigen::VectorXd interpolate(const FeSpace& space, const std::function<double(const Point&)>& f);

/// K_ij = int A grad phi_j . grad phi_i. The P1 coefficient is integrated
/// exactly (edge-midpoint rule, equal to the mean of the nodal values).
SpMat assemble_stiffness(const FeSpace& space, const NodalField& A);

/// Factorized Neumann problem with the zero boundary-mean constraint imposed
/// by a Lagrange multiplier row. For a load f with nonzero total, the
/// multiplier absorbs the total and the result solves the problem for the
/// load with its boundary mean removed.
///
/// Keeps a pointer to the space, which must outlive the solver.
class NeumannSolver {
 public:
  NeumannSolver(const FeSpace& space, const NodalField& A);

  /// Nodal load vector (length num_nodes). If require_compatible, a load
  /// whose total exceeds tol times its norm is rejected.
  FemSolution solve_load(const Eigen::VectorXd& load, bool require_compatible = true,
                         double tol = 1e-10) const;
  /// Several loads at once (columns); no compatibility check.
  Eigen::MatrixXd solve_loads(const Eigen::MatrixXd& loads) const;

  const SpMat& stiffness() const { return stiffness_; }
  const FeSpace& space() const { return *space_; }

 private:
  const FeSpace* space_;
  SpMat stiffness_;
  std::shared_ptr<Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>>> lu_;
};

FemSolution solve_neumann(const FeSpace& space, const NodalField& A, const BoundaryFunction& g);

/// u = phi on the boundary nodes, int A grad u . grad w = int f w for all
/// interior basis functions w. f is given by nodal values (P1 load).
FemSolution solve_dirichlet(const FeSpace& space, const NodalField& A,
                            const Eigen::VectorXd& boundary_values, const Eigen::VectorXd& f);

BoundaryFunction trace(const FeSpace& space, const FemSolution& u);
BoundaryFunction trace(const FeSpace& space, const Eigen::VectorXd& nodal);

/// Largest singular value of a linear map T: D -> D (dense, acting on D
/// coefficients) measured in the L2 geometry of D.
double operator_norm(const FeSpace& space, const Eigen::MatrixXd& T);

/// L2 norm of a P1 function, exact.
double l2_norm(const FeSpace& space, const Eigen::VectorXd& nodal);
/// int A grad v . grad v.
double energy(const SpMat& stiffness, const Eigen::VectorXd& v);

}  // namespace eit
