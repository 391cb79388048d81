#include "eit/commands.hpp"

#include "eit/cem.hpp"
#include "eit/errors.hpp"
#include "eit/io.hpp"
#include "eit/mesh.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

namespace eit {

namespace {

namespace fs = std::filesystem;

std::string prepare_dir(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec || !fs::is_directory(cfg.output_dir)) throw ValidationError("cannot create output directory '" + cfg.output_dir + "'");
  return cfg.output_dir;
}

std::string path_in(const std::string& dir, const char* name) { return (fs::path(dir) / name).string(); }

template <class F>
void emit(const std::string& path, F&& writer) {
  std::ostringstream ss;
  writer(ss);
  write_file(path, ss.str());
}

std::string g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

TriMesh config_mesh(const RunConfig& cfg) {
  return refine(build_initial_triangulation(cfg.inversion.domain), cfg.inversion.mesh_level);
}

ElectrodeLayout config_layout(const RunConfig& cfg, const TriMesh& mesh) {
  const InversionConfig& c = cfg.inversion;
  ElectrodeLayout l = layout_from_mesh(mesh, c.m, c.k, c.z, c.z_min, c.z_max);
  if (!c.impedances.empty()) {
    if (static_cast<int>(c.impedances.size()) != l.size()) {
      throw ValidationError("impedance list has " + std::to_string(c.impedances.size()) + " entries for " +
                            std::to_string(l.size()) + " electrodes");
    }
    l.impedance = c.impedances;
  }
  l.validate(mesh);
  return l;
}

}  // namespace

void cmd_mesh(const RunConfig& cfg, std::ostream& log) {
  const std::string dir = prepare_dir(cfg);
  const TriMesh mesh = config_mesh(cfg);
  const std::string bad = audit_conformity(mesh);
  if (!bad.empty()) throw NumericalError("mesh is not conforming: " + bad);
  emit(path_in(dir, "mesh.txt"), [&](std::ostream& os) { write_mesh(os, mesh); });
  const MeshQuality q = mesh_quality(mesh);
  log << "level " << mesh.level() << ": " << mesh.num_vertices() << " vertices, " << mesh.num_triangles()
      << " triangles, " << mesh.num_boundary_edges() << " boundary edges\n"
      << "h " << g(q.h) << ", h_min " << g(q.h_min) << ", s " << g(q.s) << '\n';
}

void cmd_forward(const RunConfig& cfg, std::ostream& log) {
  const std::string dir = prepare_dir(cfg);
  const FeSpace space(config_mesh(cfg));
  const ElectrodeLayout layout = config_layout(cfg, space.mesh());
  const NodalField A = cfg.inversion.phantom.interpolate_on(space);
  const Eigen::MatrixXd R = resistance_matrix(space, A, layout);
  const Eigen::MatrixXd Rh = simplified_resistance_matrix(space, A, layout);
  emit(path_in(dir, "R.csv"), [&](std::ostream& os) { write_matrix_csv(os, R); });
  emit(path_in(dir, "Rhat.csv"), [&](std::ostream& os) { write_matrix_csv(os, Rh); });
  emit(path_in(dir, "layout.txt"), [&](std::ostream& os) { write_layout(os, layout); });
  const LayoutStats s = layout_stats(space.mesh(), layout);
  const ElectrodeOperators ops(space, layout);
  log << "M " << s.M << ", delta " << g(s.delta) << ", mu " << g(s.mu) << ", theta " << g(s.theta) << ", eta "
      << g(s.eta) << (s.count_bound_holds() ? "" : " (count bound violated)") << '\n'
      << "|R|_2 " << g(spectral_norm(R)) << ", |Rhat|_2 " << g(spectral_norm(Rh)) << ", |Rhat - R| on PC_* "
      << g(pc_operator_norm(Rh - R, ops.measure())) << '\n';
}

void cmd_invert(const RunConfig& cfg, std::ostream& log) {
  const std::string dir = prepare_dir(cfg);
  const RunOutcome o = run_inversion(cfg.inversion);
  emit(path_in(dir, "field.txt"), [&](std::ostream& os) { write_field(os, o.result.field); });
  emit(path_in(dir, "trace.csv"), [&](std::ostream& os) { write_trace_csv(os, o.result); });
  emit(path_in(dir, "R_meas.csv"), [&](std::ostream& os) { write_matrix_csv(os, o.R_meas); });
  const ScheduleChoice& c = o.choice;
  log << "eps " << g(c.eps) << ", a " << g(c.a) << ", mesh level " << c.mesh_level << ", M " << c.M << ", delta "
      << g(c.delta) << '\n'
      << o.result.iterations << " iterations (" << o.result.message << "), objective " << g(o.result.trace.back())
      << '\n'
      << "misfit F " << g(o.result.misfit_frobenius) << ", spectral " << g(o.result.misfit_spectral) << ", tv "
      << g(o.result.tv) << ", l1 " << g(o.result.l1_error) << ", " << g(o.wall_time_s) << " s\n";
  if (o.result.warning) log << "warning: " << o.result.message << '\n';
}

void cmd_study(const RunConfig& cfg, std::ostream& log) {
  const std::string dir = prepare_dir(cfg);
  const StudyReport rep = convergence_study(cfg.inversion, cfg.eps_list, cfg.seeds, cfg.slack);
  emit(path_in(dir, "study.csv"), [&](std::ostream& os) { write_study_csv(os, rep); });
  for (const StudyRow& r : rep.rows) {
    if (!r.error.empty()) log << "eps " << g(r.eps) << " seed " << r.seed << ": " << r.error << '\n';
  }
  log << "mean l1: initial " << g(rep.initial_l1) << ", final " << g(rep.final_l1) << ", "
      << (rep.monotone_within_slack ? "non-increasing" : "not non-increasing") << " within " << g(100.0 * rep.slack)
      << "% (monotone-decay surrogate of the convergence statement)\n";
}

int cmd_verify(SuiteLevel level, std::ostream& log) {
  const std::vector<CheckResult> results = run_suite(level, &log);
  int failed = 0;
  for (const auto& r : results) failed += r.passed ? 0 : 1;
  log << (failed ? std::to_string(failed) + " check(s) failed" : "all checks passed") << '\n';
  return failed ? exit_verification : exit_ok;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Electrical impedance tomography: forward models, checks and TV-regularized inversion"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path, out_dir, level = "quick";
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--seed", seed, "noise seed (overrides the config)");
  app.add_option("--out", out_dir, "output directory (overrides the config)");
  app.add_option("--level", level, "verify suite: quick or full")->check(CLI::IsMember({"quick", "full"}));
  CLI::App* mesh = app.add_subcommand("mesh", "write the refined mesh and its quality");
  CLI::App* forward = app.add_subcommand("forward", "resistance matrices R and Rhat of the phantom");
  CLI::App* invert = app.add_subcommand("invert", "one regularized inversion");
  CLI::App* study = app.add_subcommand("study", "noise-level study");
  CLI::App* verify = app.add_subcommand("verify", "invariant and acceptance suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_validation;
  }

  try {
    if (verify->parsed()) return cmd_verify(parse_suite_level(level), std::cout);
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
    if (seed) {
      cfg.inversion.seed = *seed;
      cfg.seeds = {*seed};
    }
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    cfg.validate();
    if (mesh->parsed()) cmd_mesh(cfg, std::cout);
    if (forward->parsed()) cmd_forward(cfg, std::cout);
    if (invert->parsed()) cmd_invert(cfg, std::cout);
    if (study->parsed()) cmd_study(cfg, std::cout);
    return exit_ok;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_validation;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return exit_numerical;
  }
}

}  // namespace eit
