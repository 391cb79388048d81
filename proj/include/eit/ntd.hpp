#pragma once

#include "eit/conductivity.hpp"
#include "eit/fem.hpp"
#include "eit/field.hpp"

#include <Eigen/Core>

#include <functional>
#include <vector>

namespace eit {

/// Discrete Neumann-to-Dirichlet map of a P1 space.
///
/// green(a, b) is the trace at boundary node a of the zero-mean Neumann
/// solution for a unit load at boundary node b (mean removed). Acting on
/// D, the map is dtrace * green * dtrace^T * dmass, which applies N_h to
/// the mean-free part of its argument.
struct NtDRep {
  Eigen::MatrixXd green;
  const FeSpace* space = nullptr;
  int level = 0;

  /// Dense operator on D coefficients.
  Eigen::MatrixXd on_boundary_space() const;
  /// Apply to a boundary function given in D.
  Eigen::VectorXd apply(const Eigen::VectorXd& g) const;
  /// max |G - G^T| / max |G|.
  double symmetry_defect() const;
};

NtDRep ntd_assemble(const FeSpace& space, const NodalField& A);
NtDRep ntd_assemble(const NeumannSolver& solver, int level);

/// Prolongation D(coarse) -> D(fine) for a fine mesh obtained by uniform
/// refinement of the coarse one; throws ValidationError otherwise.
SpMat boundary_prolongation(const FeSpace& coarse, const FeSpace& fine);

/// The coarse map seen on the fine boundary space: Pr N_c Pi_c, where Pi_c
/// is the L2 projection of D(fine) onto D(coarse).
Eigen::MatrixXd transfer(const NtDRep& coarse, const FeSpace& fine);

/// L2-L2 operator norm of N1 - N2 (restricted to mean-free data). Maps on
/// different nested meshes are compared on the finer boundary space.
double l2l2_distance(const NtDRep& a, const NtDRep& b);
double l2l2_norm(const NtDRep& a);

struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;
};
/// Least-squares line through (log x, log y); needs two or more points.
LogLogFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y);

struct HolderReport {
  std::vector<double> t;
  std::vector<double> l1;   // ||A(t) - A1||_L1
  std::vector<double> ntd;  // ||N(A(t)) - N(A1)||
  double slope = 0.0;       // fitted over t > 0
  bool monotone = true;     // ntd nondecreasing in t
};
/// Linear homotopy A(t) = A1 + t (A2 - A1).
HolderReport holder_check(const FeSpace& space, const NodalField& a1, const NodalField& a2,
                          const std::vector<double>& t);

struct ConvergenceReport {
  std::vector<int> levels;
  std::vector<double> h;
  std::vector<double> error;
  int reference_level = 0;
  double slope = 0.0;     // of log error against log h
  bool monotone = true;   // strictly decreasing error
};
/// NtD maps of the interpolated conductivity on base refined to each level,
/// compared with the map two levels finer than the finest tested level.
ConvergenceReport fem_convergence_check(const TriMesh& base, const std::function<double(const Point&)>& sigma,
                                        double lambda0, double lambda1, const std::vector<int>& levels);

}  // namespace eit
