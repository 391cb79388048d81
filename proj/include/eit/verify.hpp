#pragma once

#include "eit/inverse.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace eit {

struct CheckResult {
  std::string id;
  std::string name;
  bool passed = false;
  double seconds = 0.0;
  double budget_s = 0.0;  // 0: no budget
  std::string detail;
};

/// Adjoint identity <(E P) f, g> = <f, Q g>: 20 random mean-free pairs,
/// level-4 square, layout (m=1, k=1), tolerance 1e-12.
CheckResult check_adjoint();
/// ||Q||, ||E|| <= sqrt(theta) + 1e-9 on every layout of levels 2..5, m <= 3.
CheckResult check_operator_norms();
/// Log-log slopes against delta of ||(1 - E P) f||, ||N_h - E R Q|| and
/// ||Rhat - R|| over layouts m = 2..5, k = 2^(m-1) on a level-7 square;
/// for sigma = 1 and a disk phantom; each slope >= 0.4.
CheckResult check_delta_rates();
/// NtD error against a reference two levels finer, levels 2..5, smooth
/// sigma: strictly decreasing, slope >= 0.5.
CheckResult check_fem_convergence();
/// discretize_bv of a disk phantom, alpha = 0.45, levels 4..7: L1 error
/// strictly decreasing, TV gap decreasing, final gap within 15%.
CheckResult check_discretization();
/// L1 distance of the mollified phantom, gamma in {.08, .04, .02, .01}:
/// slope in [0.8, 1.2].
CheckResult check_mollification();
/// Adjoint gradient against central differences, 10 directions x 3 fields,
/// relative error <= 1e-4.
CheckResult check_gradient();
/// N(cA) = N(A)/c, Rhat(cA) = Rhat(A)/c, solve_neumann scaling, to 1e-10.
CheckResult check_scaling();
/// Four-level noise study on the reference configuration.
CheckResult check_end_to_end();
/// Noise-free inverse-crime run: misfit <= 1e-8, L1 <= 5% of range x |Omega|.
CheckResult check_inverse_crime();

/// Small consistency checks of mesh, CEM, noise and I/O plumbing.
std::vector<CheckResult> check_invariants();

/// Disk phantom, schedule and calibration used by the end-to-end study.
InversionConfig reference_study_config();
/// Setup of the noise-free self-test.
InversionConfig reference_crime_config();

enum class SuiteLevel { quick, full };
SuiteLevel parse_suite_level(const std::string& s);

/// quick: invariants and the cheap criteria; full: everything.
std::vector<CheckResult> run_suite(SuiteLevel level, std::ostream* progress = nullptr);

/// "PASS|FAIL id name: detail (t s)".
std::string format_result(const CheckResult& r);

}  // namespace eit
