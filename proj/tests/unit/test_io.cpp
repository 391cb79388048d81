#include "eit/commands.hpp"
#include "eit/config.hpp"
#include "eit/errors.hpp"
#include "eit/io.hpp"
#include "eit/mesh.hpp"

#include <doctest.h>

#include <Eigen/Core>

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

using namespace eit;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("eit_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "eit");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

int count_lines(const std::string& s) {
  int n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

const char* small_config = R"({
  "phantom": {"background": 1.0, "lambda0": 0.5, "lambda1": 2.0,
              "disks": [{"center": [0.5, 0.5], "radius": 0.2, "value": 1.8}]},
  "mesh": {"level": 3, "data_levels": 1},
  "layout": {"m": 1, "k": 1, "impedance": 0.1},
  "noise": {"eps": 0.01, "eps_list": [0.1, 0.05], "seeds": [1]},
  "schedule": {"enabled": false},
  "optimizer": {"max_iterations": 4}
})";

}  // namespace

TEST_CASE("matrix CSV round trip is exact") {
  Eigen::MatrixXd A(3, 4);
  A << 1.0 / 3.0, -2e-300, 5.5, 0.0, 1e17, -0.1, 2.0 / 7.0, 3.0, -4.0, 6.02e23, 1e-8, -1.0 / 9.0;
  std::stringstream ss;
  write_matrix_csv(ss, A);
  CHECK(read_matrix_csv(ss) == A);
  std::stringstream ragged("1,2\n3\n");
  CHECK_THROWS_AS(read_matrix_csv(ragged), ValidationError);
  std::stringstream junk("1,x\n");
  CHECK_THROWS_AS(read_matrix_csv(junk), ValidationError);
}

TEST_CASE("field dumps round trip") {
  NodalField s = NodalField::scalar_from(Eigen::Vector3d(0.7, 1.0 / 3.0, 1.9), 0.5, 2.0);
  std::stringstream ss;
  write_field(ss, s);
  const NodalField s2 = read_field(ss);
  CHECK(s2.is_scalar());
  CHECK(s2.values == s.values);
  CHECK(s2.lambda0 == 0.5);

  NodalField t = NodalField::constant_tensor(2, Eigen::Matrix2d::Identity(), 0.5, 2.0);
  t.values(1, 1) = 0.1 / 3.0;
  std::stringstream ts;
  write_field(ts, t);
  const NodalField t2 = read_field(ts);
  CHECK_FALSE(t2.is_scalar());
  CHECK(t2.values == t.values);

  std::stringstream bad("field vector 2 0.5 2\n1\n2\n");
  CHECK_THROWS_AS(read_field(bad), ValidationError);
  std::stringstream shortf("field scalar 3 0.5 2\n1\n");
  CHECK_THROWS_AS(read_field(shortf), ValidationError);
}

TEST_CASE("config parsing") {
  const RunConfig d = parse_config("{}");
  CHECK(d.inversion.m == 2);
  CHECK(d.eps_list.size() == 4);

  const RunConfig c = parse_config(small_config);
  CHECK(c.inversion.mesh_level == 3);
  CHECK(c.inversion.data_levels == 1);
  CHECK_FALSE(c.inversion.use_schedule);
  CHECK(c.inversion.phantom.disks.size() == 1);
  CHECK(c.inversion.phantom.disks[0].center.x() == 0.5);
  CHECK(c.eps_list == std::vector<double>{0.1, 0.05});
  CHECK(c.inversion.optimizer.max_iterations == 4);

  const RunConfig z = parse_config(R"({"layout": {"m": 0, "k": 1, "impedance": [0.1, 0.2, 0.3, 0.4]},
                                       "noise": {"mode": "relative"}, "seed": 12345678901234})");
  CHECK(z.inversion.impedances.size() == 4);
  CHECK(z.inversion.schedule.mode == NoiseMode::relative);
  CHECK(z.inversion.seed == 12345678901234ull);

  CHECK_THROWS_AS(parse_config("{"), ValidationError);
  CHECK_THROWS_AS(parse_config(R"({"mesh": {"levle": 3}})"), ValidationError);
  CHECK_THROWS_AS(parse_config(R"({"mesh": {"level": "three"}})"), ValidationError);
  CHECK_THROWS_AS(parse_config(R"({"noise": {"mode": "loud"}})"), ValidationError);
  CHECK_THROWS_AS(parse_config(R"({"noise": {"eps_list": [0.1, 0.2]}})"), ValidationError);
  CHECK_THROWS_AS(parse_config(R"({"schedule": {"gamma": 0.9}})"), ValidationError);
  CHECK_THROWS_AS(parse_config(R"({"mesh": {"level": 9, "max_level": 7}, "schedule": {"enabled": false}})"),
                  ValidationError);
  CHECK_THROWS_AS(parse_config(R"({"domain": [[0, 0], [1, 0]]})"), ValidationError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ValidationError);
}

TEST_CASE("cli mesh and forward write reloadable, reproducible files") {
  const fs::path dir = scratch("cli_fwd");
  write_file((dir / "cfg.json").string(), small_config);
  const std::string cfg = (dir / "cfg.json").string();

  CHECK(cli({"mesh", "--config", cfg, "--out", (dir / "m").string()}) == exit_ok);
  std::stringstream ms(read_file((dir / "m" / "mesh.txt").string()));
  const TriMesh mesh = read_mesh(ms, 3);
  CHECK(mesh.num_triangles() == 128);

  CHECK(cli({"forward", "--config", cfg, "--out", (dir / "f").string()}) == exit_ok);
  std::stringstream rs(read_file((dir / "f" / "R.csv").string()));
  const Eigen::MatrixXd R = read_matrix_csv(rs);
  CHECK(R.rows() == 16);
  CHECK(R.rowwise().sum().cwiseAbs().maxCoeff() <= 1e-10 * R.cwiseAbs().maxCoeff());
  std::stringstream hs(read_file((dir / "f" / "Rhat.csv").string()));
  const Eigen::MatrixXd Rh = read_matrix_csv(hs);
  CHECK((Rh - R).norm() > 0.0);
  const std::string first = read_file((dir / "f" / "R.csv").string());
  CHECK(cli({"forward", "--config", cfg, "--out", (dir / "f").string()}) == exit_ok);
  CHECK(read_file((dir / "f" / "R.csv").string()) == first);
  CHECK(count_lines(read_file((dir / "f" / "layout.txt").string())) == 16);
}

TEST_CASE("cli invert and study outputs") {
  const fs::path dir = scratch("cli_inv");
  write_file((dir / "cfg.json").string(), small_config);
  const std::string cfg = (dir / "cfg.json").string();

  CHECK(cli({"invert", "--config", cfg, "--out", (dir / "a").string(), "--seed", "5"}) == exit_ok);
  CHECK(cli({"invert", "--config", cfg, "--out", (dir / "b").string(), "--seed", "5"}) == exit_ok);
  CHECK(cli({"invert", "--config", cfg, "--out", (dir / "c").string(), "--seed", "6"}) == exit_ok);
  const std::string fa = read_file((dir / "a" / "field.txt").string());
  CHECK(fa == read_file((dir / "b" / "field.txt").string()));
  CHECK(read_file((dir / "a" / "R_meas.csv").string()) != read_file((dir / "c" / "R_meas.csv").string()));
  std::stringstream fs_(fa);
  CHECK(read_field(fs_).num_nodes() == 81);
  const std::string trace = read_file((dir / "a" / "trace.csv").string());
  CHECK(trace.rfind("iteration,objective,tau\n", 0) == 0);
  CHECK(count_lines(trace) >= 2);
  CHECK(count_lines(trace) <= 1 + 1 + 4);

  CHECK(cli({"study", "--config", cfg, "--out", (dir / "s").string()}) == exit_ok);
  const std::string study = read_file((dir / "s" / "study.csv").string());
  CHECK(count_lines(study) == 3);
  CHECK(study.rfind("eps,a,h,delta,M,iterations,misfit_frobenius,misfit_spectral,tv,l1_error,wall_time_s\n", 0) == 0);
}

TEST_CASE("cli exit codes") {
  const fs::path dir = scratch("cli_exit");
  CHECK(cli({}) == exit_validation);
  CHECK(cli({"frobnicate"}) == exit_validation);
  CHECK(cli({"mesh", "--config", (dir / "missing.json").string()}) == exit_validation);
  write_file((dir / "bad.json").string(), R"({"layout": {"m": 1, "k": 5}})");
  CHECK(cli({"forward", "--config", (dir / "bad.json").string()}) == exit_validation);
  CHECK(cli({"verify", "--level", "slow"}) == exit_validation);
  CHECK(cli({"verify", "--level", "quick"}) == exit_ok);
}
