#pragma once

#include "eit/fem.hpp"
#include "eit/field.hpp"
#include "eit/mesh.hpp"

#include <Eigen/Core>
#include <Eigen/SparseLU>

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace eit {

/// Electrodes and extended electrodes as sets of boundary edge indices of a
/// mesh at refinement level mesh_level.
struct ElectrodeLayout {
  std::vector<std::vector<int>> electrodes;
  std::vector<std::vector<int>> extended;
  std::vector<double> impedance;
  double z_min = 0.01;
  double z_max = 10.0;
  int mesh_level = 0;

  int size() const { return static_cast<int>(electrodes.size()); }
  /// Disjointness, containment, coverage and impedance window; throws ValidationError.
  void validate(const TriMesh& mesh) const;
  /// Same layout on a mesh refined `levels` more times (edge i -> 2^l i ... 2^l i + 2^l - 1).
  ElectrodeLayout refined(int levels) const;
  /// Same layout expressed on a mesh at the given level (>= mesh_level).
  ElectrodeLayout on_level(int level) const { return refined(level - mesh_level); }
};

struct LayoutStats {
  int M = 0;
  double delta = 0.0;  // max electrode diameter
  double mu = 0.0;     // max/min electrode measure
  double theta = 0.0;  // max |ext_m| / |e_m|
  double eta = 0.0;    // max diam(ext_m) / |ext_m|
  double perimeter = 0.0;
  /// M <= eta * theta * mu * perimeter / delta.
  bool count_bound_holds() const;
};

/// Extended electrodes are the boundary edges of the level n - m ancestor
/// mesh; electrode p uses the first k of the 2^m fine sub-edges of its
/// extended electrode. Requires 1 <= k <= 2^m and mesh.level() >= m.
ElectrodeLayout layout_from_mesh(const TriMesh& mesh, int m, int k, double z = 0.1, double z_min = 0.01,
                                 double z_max = 10.0);

LayoutStats layout_stats(const TriMesh& mesh, const ElectrodeLayout& layout);

/// "m : z_m : e-edges : ext-edges" per line.
void write_layout(std::ostream& os, const ElectrodeLayout& layout);

/// The boundary operator algebra of a layout, as dense matrices acting on
/// coefficients in the boundary space D of an FeSpace (see fem.hpp) or on
/// vectors in R^M.
class ElectrodeOperators {
 public:
  ElectrodeOperators(const FeSpace& space, const ElectrodeLayout& layout);

  int size() const { return static_cast<int>(measure_.size()); }
  const Eigen::VectorXd& measure() const { return measure_; }
  const Eigen::VectorXd& extended_measure() const { return ext_measure_; }
  /// Indicator functions in D, one column per electrode.
  const Eigen::MatrixXd& chi() const { return chi_; }
  const Eigen::MatrixXd& chi_extended() const { return chi_ext_; }
  /// Nodal loads int_{e_m} phi_i (num_nodes x M).
  const Eigen::MatrixXd& node_loads() const { return node_loads_; }

  /// Phi(I) = sum I_m / |e_m| chi_{e_m}.
  Eigen::VectorXd phi(const Eigen::VectorXd& I) const;
  /// Electrode integrals of a boundary function (inverse of Phi on PC).
  Eigen::VectorXd phi_inv(const Eigen::VectorXd& f) const;
  Eigen::MatrixXd phi_matrix() const;      // D x M
  Eigen::MatrixXd phi_inv_matrix() const;  // M x D

  Eigen::MatrixXd p_e() const;     // average over each electrode
  Eigen::MatrixXd p_star() const;  // remove the boundary mean
  Eigen::MatrixXd p() const;       // onto PC_* : P_{e*} P_e
  Eigen::MatrixXd q() const;       // sum (int_{ext_m} f)/|e_m| chi_{e_m}
  /// E restricted to PC composed with P_e, i.e. E o P_e on all of D.
  Eigen::MatrixXd e_pe() const;
  /// E o P.
  Eigen::MatrixXd e_p() const;
  /// E(Phi(V)) for a vector V: P_* sum V_m / |e_m| chi_{ext_m}.
  Eigen::VectorXd extend(const Eigen::VectorXd& V) const;
  /// E o (Phi R Phi^{-1}) o Q on D.
  Eigen::MatrixXd e_r_q(const Eigen::MatrixXd& R) const;
  /// Phi R Phi^{-1} P on D.
  Eigen::MatrixXd lift(const Eigen::MatrixXd& R) const;

  const FeSpace& space() const { return *space_; }

 private:
  const FeSpace* space_;
  Eigen::VectorXd measure_, ext_measure_;
  Eigen::MatrixXd chi_, chi_ext_, node_loads_;
};

/// Norm of Phi R Phi^{-1} on PC_* (zero-sum currents with the weighted norm
/// sum I_m^2 / |e_m|).
double pc_operator_norm(const Eigen::MatrixXd& R, const Eigen::VectorXd& measure);
/// Same on all of PC.
double pc_full_operator_norm(const Eigen::MatrixXd& R, const Eigen::VectorXd& measure);
/// Euclidean spectral norm.
double spectral_norm(const Eigen::MatrixXd& R);

struct CemSolution {
  Eigen::VectorXd u;  // nodal potential
  Eigen::VectorXd U;  // electrode potentials
  double residual = 0.0;
};

/// Factorized CEM system for one conductivity and layout:
///   int A grad u . grad w + sum (1/z_m) int_{e_m} (u - U_m)(w - W_m) = sum I_m W_m
/// with the normalization sum (|e_m| U_m - z_m I_m) = 0 imposed by a multiplier.
class CemSolver {
 public:
  CemSolver(const FeSpace& space, const NodalField& A, const ElectrodeLayout& layout);

  /// Rejects patterns with sum I != 0.
  CemSolution solve(const Eigen::VectorXd& I) const;
  /// Currents recovered from a solution: (1/z_m) int_{e_m} (U_m - u).
  Eigen::VectorXd currents(const CemSolution& s) const;
  /// Voltage pattern V_m = int_{e_m} u + c |e_m| with sum V = 0.
  Eigen::VectorXd voltages(const CemSolution& s) const;
  /// B((u,U),(u,U)).
  double energy(const CemSolution& s) const;

 private:
  const FeSpace* space_;
  ElectrodeLayout layout_;
  ElectrodeOperators ops_;
  SpMat system_;
  std::shared_ptr<Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>>> lu_;
};

CemSolution solve_cem(const FeSpace& space, const NodalField& A, const Eigen::VectorXd& I,
                      const ElectrodeLayout& layout);

/// Completes an M x (M-1) set of responses to the patterns e_j - e_M into
/// the matrix with R [1] = 0.
Eigen::MatrixXd complete_resistance(const Eigen::MatrixXd& responses);

/// Full CEM resistance matrix.
Eigen::MatrixXd resistance_matrix(const FeSpace& space, const NodalField& A, const ElectrodeLayout& layout);

/// Simplified resistance matrix Phi^{-1} P N_h(A) Phi (no contact impedance).
Eigen::MatrixXd simplified_resistance_matrix(const FeSpace& space, const NodalField& A,
                                             const ElectrodeLayout& layout);
Eigen::MatrixXd simplified_resistance_matrix(const NeumannSolver& solver, const ElectrodeOperators& ops);

}  // namespace eit
