#pragma once

#include "eit/config.hpp"
#include "eit/verify.hpp"

#include <iosfwd>

namespace eit {

enum ExitCode { exit_ok = 0, exit_validation = 1, exit_numerical = 2, exit_verification = 3 };

/// Each command writes its files into cfg.output_dir (created if missing)
/// and a short report to `log`. Errors propagate as exceptions.
///
/// mesh:    mesh.txt, quality and counts
/// forward: R.csv, Rhat.csv, layout.txt on cfg mesh level (no schedule)
/// invert:  field.txt, trace.csv, R_meas.csv, summary
/// study:   study.csv over cfg.eps_list x cfg.seeds
void cmd_mesh(const RunConfig& cfg, std::ostream& log);
void cmd_forward(const RunConfig& cfg, std::ostream& log);
void cmd_invert(const RunConfig& cfg, std::ostream& log);
void cmd_study(const RunConfig& cfg, std::ostream& log);
/// Returns exit_ok or exit_verification.
int cmd_verify(SuiteLevel level, std::ostream& log);

/// Full command line: subcommand, --config, --seed, --out, --level.
/// Maps ValidationError to 1, NumericalError to 2, failed checks to 3.
int run_cli(int argc, char** argv);

}  // namespace eit
