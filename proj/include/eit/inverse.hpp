#pragma once

#include "eit/cem.hpp"
#include "eit/conductivity.hpp"
#include "eit/fem.hpp"
#include "eit/field.hpp"
#include "eit/mesh.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace eit {

enum class NoiseMode { absolute, relative };

/// Parameter rule a = c eps^gamma, h <= c0 eps^a1, c1 eps^a2 <= delta <= c2 eps^a2.
/// alpha1 and beta1 are regularity exponents of the unknown that cannot be
/// computed; they are taken as assumptions.
struct Schedule {
  double gamma = 0.05;
  double a1 = 0.5;
  double a2 = 0.5;
  double c = 1.0;
  double c0 = 0.5;
  double c1 = 0.2;
  double c2 = 0.5;
  double alpha1 = 0.5;
  double beta1 = 0.1;
  int N = 2;
  NoiseMode mode = NoiseMode::absolute;
  int max_level = 7;  // finest inversion mesh level a schedule may request
};

/// Labels of the violated inequalities ("gamma<a2", ...); empty when valid.
/// Nonpositive constants and c1 >= c2 are reported as well.
std::vector<std::string> validate_schedule(const Schedule& s);

struct ScheduleChoice {
  double eps = 0.0;
  double a = 0.0;
  double h_target = 0.0;   // c0 eps^a1
  double delta_lo = 0.0;   // c1 eps^a2 (0 in relative mode)
  double delta_hi = 0.0;   // c2 eps^a2
  int mesh_level = 0;      // inversion mesh
  int layout_level = 0;    // level on which the electrodes are built
  double h = 0.0;
  double delta = 0.0;
  int M = 0;
  ElectrodeLayout layout;  // expressed on mesh_level
};

/// Smallest mesh level with h <= c0 eps^a1; electrodes built with
/// layout_from_mesh(m, k) on the smallest level whose electrode diameter is
/// at most c2 eps^a2 (and, in absolute mode, at least c1 eps^a2). The mesh
/// level is raised to the electrode level when needed. Throws
/// ValidationError for invalid schedules, an empty delta bracket or levels
/// beyond s.max_level.
ScheduleChoice schedule_apply(const Schedule& s, double eps, const TriMesh& base, int m, int k, double z = 0.1);

/// R0 plus a uniform random perturbation, centred so that rows and columns
/// of the perturbation sum to zero and rescaled to Frobenius norm M eps
/// (absolute) or spectral norm eps (relative). Deterministic in the seed.
Eigen::MatrixXd noise_inject(const Eigen::MatrixXd& R0, double eps, std::uint64_t seed, NoiseMode mode);

/// Huber function: s^2 / (2 tau) for s <= tau, s - tau / 2 beyond; tau = 0 gives |s|.
double huber(double s, double tau);

/// TV with every gradient norm replaced by its Huber value (tau = 0: exact).
double tv_smoothed(const FeSpace& space, const NodalField& field, double tau);
/// Gradient of tv_smoothed with respect to field.flat(); requires tau > 0.
Eigen::VectorXd tv_gradient(const FeSpace& space, const NodalField& field, double tau);

struct ObjectiveParts {
  double misfit = 0.0;  // ||Rhat(A) - R_meas||_F^2
  double tv = 0.0;
  double value = 0.0;   // misfit / a + tv
};

/// The discrete regularized functional for fixed data and mesh. Keeps
/// references to the space; the layout must be on the space's mesh level.
class InverseProblem {
 public:
  InverseProblem(const FeSpace& space, const ElectrodeLayout& layout, Eigen::MatrixXd R_meas, double a);

  const FeSpace& space() const { return *space_; }
  const ElectrodeOperators& operators() const { return ops_; }
  const Eigen::MatrixXd& data() const { return R_meas_; }
  double a() const { return a_; }
  int num_electrodes() const { return ops_.size(); }

  /// Simplified resistance matrix of A.
  Eigen::MatrixXd forward(const NodalField& A) const;
  /// Objective with Huber-smoothed TV (tau = 0: the exact functional).
  ObjectiveParts objective(const NodalField& A, double tau = 0.0) const;
  /// Gradient of objective(A, tau) with respect to A.flat().
  Eigen::VectorXd gradient(const NodalField& A, double tau) const;
  /// Gradient of the misfit alone.
  Eigen::VectorXd misfit_gradient(const NodalField& A) const;
  /// d vec(Rhat) / d A.flat() (column-major vec), M^2 x parameters.
  Eigen::MatrixXd jacobian(const NodalField& A) const;

 private:
  struct State;
  State evaluate(const NodalField& A) const;

  const FeSpace* space_;
  ElectrodeOperators ops_;
  Eigen::MatrixXd R_meas_;
  double a_;
  Eigen::MatrixXd centering_;   // I - |e| 1^T / sum |e|
  Eigen::MatrixXd patterns_;    // M x M: differences of unit densities, then completion
};

struct OptimizerSettings {
  int max_iterations = 100;
  double tau0 = 1e-2;          // initial Huber parameter
  double tau_min = 1e-5;
  double continuation = 0.5;   // tau <- continuation * tau on stagnation
  double stagnation = 1e-4;    // relative decrease that counts as stagnation
  double grad_tol = 1e-9;      // projected gradient norm
  int max_backtracks = 30;
  bool gauss_newton = true;    // false: projected gradient steps only
  double armijo = 1e-4;
};

struct InversionResult {
  NodalField field;
  std::vector<double> trace;   // exact objective after every accepted iteration (entry 0: start)
  std::vector<double> tau;     // Huber parameter used for each accepted iteration
  double misfit = 0.0;         // ||Rhat - R_meas||_F^2
  double misfit_frobenius = 0.0;
  double misfit_spectral = 0.0;
  double tv = 0.0;
  double l1_error = -1.0;      // when a ground truth was supplied
  double grad_norm = 0.0;      // projected gradient of the final smoothed objective
  int iterations = 0;
  bool warning = false;        // line search gave up before convergence
  std::string message;
};

/// Projected descent on the admissible set: Levenberg-Marquardt steps on the
/// Gauss-Newton model with a lagged-diffusivity TV Hessian (or plain
/// gradient steps), backtracking with an Armijo test on the smoothed
/// objective and a non-increase test on the exact one.
InversionResult minimize(const InverseProblem& problem, const NodalField& start, const OptimizerSettings& opt);

struct InversionConfig {
  Polygon domain = Polygon::unit_square();
  Phantom phantom;
  int mesh_level = 4;           // used when no schedule is applied
  int m = 2, k = 2;
  double z = 0.1;
  std::vector<double> impedances;  // optional per-electrode values, overriding z
  double z_min = 0.01, z_max = 10.0;
  double eps = 0.1;
  bool use_schedule = true;
  Schedule schedule;
  OptimizerSettings optimizer;
  std::uint64_t seed = 1;
  int data_levels = 2;          // measurement mesh = inversion mesh + data_levels
  bool inverse_crime = false;   // data from Rhat on the inversion mesh itself
  bool tensor = false;          // reconstruct a symmetric tensor field
  void validate() const;
};

struct RunOutcome {
  ScheduleChoice choice;
  InversionResult result;
  Eigen::MatrixXd R_clean;   // noise-free data
  Eigen::MatrixXd R_meas;
  double wall_time_s = 0.0;
};

/// Full pipeline for one noise level: schedule, simulated data, noise, minimization.
RunOutcome run_inversion(const InversionConfig& cfg);

struct StudyRow {
  double eps = 0.0, a = 0.0, h = 0.0, delta = 0.0;
  int M = 0;
  std::uint64_t seed = 0;
  int iterations = 0;
  double misfit_frobenius = 0.0, misfit_spectral = 0.0, tv = 0.0, l1_error = 0.0, wall_time_s = 0.0;
  std::string error;   // empty when the run succeeded
};

struct StudyReport {
  std::vector<StudyRow> rows;
  /// l1 error (averaged over seeds) non-increasing up to the slack factor
  /// between consecutive noise levels.
  bool monotone_within_slack = true;
  double slack = 0.1;
  double initial_l1 = 0.0, final_l1 = 0.0;
};

/// One inversion per (eps, seed); eps must be strictly decreasing. Failures
/// are recorded per row and the study continues.
StudyReport convergence_study(const InversionConfig& base, const std::vector<double>& eps,
                              const std::vector<std::uint64_t>& seeds, double slack = 0.1);

/// CSV with the columns eps,a,h,delta,M,iterations,misfit_frobenius,
/// misfit_spectral,tv,l1_error,wall_time_s.
void write_study_csv(std::ostream& os, const StudyReport& report);

}  // namespace eit
