#include "eit/cem.hpp"
#include "eit/conductivity.hpp"
#include "eit/errors.hpp"
#include "eit/inverse.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

using namespace eit;

namespace {

TriMesh square(int level) { return refine(build_initial_triangulation(Polygon::unit_square()), level); }

bool has(const std::vector<std::string>& v, const std::string& s) { return std::find(v.begin(), v.end(), s) != v.end(); }

Phantom disk_phantom() {
  Phantom p;
  p.background = 1.0;
  p.disks.push_back({Point(0.5, 0.5), 0.2, 1.8});
  return p;
}

}  // namespace

TEST_CASE("schedule inequalities") {
  Schedule s;
  CHECK(validate_schedule(s).empty());

  Schedule big = s;
  big.gamma = 0.6;  // above a2, beta1 and 2 a1 alpha1
  const auto bad = validate_schedule(big);
  CHECK(has(bad, "gamma<a2"));
  CHECK(has(bad, "gamma<beta1"));
  CHECK(has(bad, "gamma<2*a1*alpha1"));
  CHECK_FALSE(has(bad, "gamma+2(N-1)a2<2"));

  Schedule wide = s;
  wide.a2 = 0.99;  // 0.05 + 2 * 0.99 >= 2
  CHECK(has(validate_schedule(wide), "gamma+2(N-1)a2<2"));
  wide.mode = NoiseMode::relative;
  CHECK(validate_schedule(wide).empty());

  Schedule order = s;
  order.c1 = 0.5;
  order.c2 = 0.5;
  CHECK(has(validate_schedule(order), "c1<c2"));
  order.mode = NoiseMode::relative;
  CHECK_FALSE(has(validate_schedule(order), "c1<c2"));

  Schedule few = s;
  few.N = 1;
  CHECK(has(validate_schedule(few), "N>=2"));
  Schedule neg = s;
  neg.c = -1.0;
  CHECK(has(validate_schedule(neg), "c>0"));
}

TEST_CASE("schedule_apply picks the coarsest admissible dyadic levels") {
  const TriMesh base = build_initial_triangulation(Polygon::unit_square());
  const double h0 = mesh_quality(base).h;
  Schedule s;
  s.c2 = 1.0;
  for (double eps : {0.1, 0.05, 0.025, 0.0125}) {
    const ScheduleChoice c = schedule_apply(s, eps, base, 2, 2);
    CHECK(c.a == doctest::Approx(std::pow(eps, 0.05)));
    CHECK(c.h_target == doctest::Approx(0.5 * std::sqrt(eps)));
    CHECK(c.h <= c.h_target);
    CHECK(c.delta <= c.delta_hi);
    CHECK(c.delta >= c.delta_lo);
    CHECK(c.mesh_level >= c.layout_level);
    CHECK(c.layout.mesh_level == c.mesh_level);
    // one level coarser misses a target
    const bool h_tight = h0 / std::ldexp(1.0, c.mesh_level - 1) > c.h_target;
    const bool d_tight = 2.0 * c.delta > c.delta_hi;
    CHECK((h_tight || (c.mesh_level == c.layout_level && d_tight)));
    const TriMesh m = square(c.mesh_level);
    CHECK(mesh_quality(m).h == doctest::Approx(c.h));
    CHECK(layout_stats(m, c.layout).delta == doctest::Approx(c.delta));
    CHECK(c.M == c.layout.size());
  }
  // square, m = 2, k = 2, eps = 0.1: target 0.316 puts the electrodes on
  // level 3, two edges of length 1/8 on each of the 8 level-1 edges
  const ScheduleChoice c = schedule_apply(s, 0.1, base, 2, 2);
  CHECK(c.layout_level == 3);
  CHECK(c.M == 8);
  CHECK(c.delta == doctest::Approx(0.25));

  Schedule tight = s;
  tight.max_level = 3;
  CHECK_THROWS_AS(schedule_apply(tight, 0.0125, base, 2, 2), ValidationError);
  Schedule narrow = s;
  narrow.c1 = 0.9;
  narrow.c2 = 1.0;  // bracket narrower than a factor 2 misses dyadic sizes
  bool any_throw = false;
  for (double eps : {0.1, 0.07, 0.05, 0.03}) {
    try {
      schedule_apply(narrow, eps, base, 2, 2);
    } catch (const ValidationError&) {
      any_throw = true;
    }
  }
  CHECK(any_throw);
  CHECK_THROWS_AS(schedule_apply(s, 0.0, base, 2, 2), ValidationError);
  CHECK_THROWS_AS(schedule_apply(s, 0.1, square(1), 2, 2), ValidationError);
}

TEST_CASE("noise injection") {
  Eigen::MatrixXd R0 = Eigen::MatrixXd::Random(6, 6);
  R0 = (R0 + R0.transpose()).eval();
  const Eigen::MatrixXd a = noise_inject(R0, 0.05, 7, NoiseMode::absolute);
  CHECK((a - R0).norm() == doctest::Approx(6 * 0.05).epsilon(1e-12));
  CHECK((a - R0).rowwise().sum().cwiseAbs().maxCoeff() <= 1e-13);
  CHECK((a - R0).colwise().sum().cwiseAbs().maxCoeff() <= 1e-13);
  CHECK(a == noise_inject(R0, 0.05, 7, NoiseMode::absolute));
  CHECK(a != noise_inject(R0, 0.05, 8, NoiseMode::absolute));
  const Eigen::MatrixXd r = noise_inject(R0, 0.05, 7, NoiseMode::relative);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(r - R0);
  CHECK(svd.singularValues()[0] == doctest::Approx(0.05).epsilon(1e-12));
  CHECK_THROWS_AS(noise_inject(R0, 0.0, 1, NoiseMode::absolute), ValidationError);
  CHECK_THROWS_AS(noise_inject(R0, 1.5, 1, NoiseMode::absolute), ValidationError);
  CHECK_THROWS_AS(noise_inject(Eigen::MatrixXd::Zero(3, 2), 0.1, 1, NoiseMode::absolute), ValidationError);
}

TEST_CASE("Huber function and smoothed TV") {
  CHECK(huber(0.5, 1.0) == doctest::Approx(0.125));
  CHECK(huber(2.0, 1.0) == doctest::Approx(1.5));
  CHECK(huber(-3.0, 0.0) == 3.0);
  CHECK(huber(0.1, 0.1) == doctest::Approx(0.05));  // both branches agree at tau

  const FeSpace space(square(3));
  const NodalField A = disk_phantom().interpolate_on(space);
  CHECK(tv_smoothed(space, A, 0.0) == doctest::Approx(tv_seminorm(space, A)).epsilon(1e-13));
  // smoothing only lowers the value, by at most tau / 2 per unit area
  const double t = tv_smoothed(space, A, 0.05);
  CHECK(t <= tv_seminorm(space, A));
  CHECK(t >= tv_seminorm(space, A) - 0.025 - 1e-12);
  CHECK(tv_smoothed(space, NodalField::constant(space.num_nodes(), 1.0, 0.5, 2.0), 0.01) == 0.0);
  CHECK_THROWS_AS(tv_gradient(space, A, 0.0), ValidationError);
}

TEST_CASE("TV gradient matches central differences") {
  const FeSpace space(square(2));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (bool tensor : {false, true}) {
    NodalField A = tensor ? NodalField::constant_tensor(space.num_nodes(), Eigen::Matrix2d::Identity(), 0.5, 2.0)
                          : NodalField::constant(space.num_nodes(), 1.0, 0.5, 2.0);
    for (int i = 0; i < space.num_nodes(); ++i) {
      A.values(i, 0) = 1.2 + 0.3 * u(rng);
      if (tensor) {
        A.values(i, 1) = 0.1 * u(rng);
        A.values(i, 2) = 1.1 + 0.2 * u(rng);
      }
    }
    const double tau = 0.05;
    const Eigen::VectorXd g = tv_gradient(space, A, tau);
    for (int d = 0; d < 5; ++d) {
      Eigen::VectorXd dir(g.size());
      for (Eigen::Index i = 0; i < dir.size(); ++i) dir[i] = u(rng);
      const double h = 1e-6;
      NodalField p = A, m = A;
      p.set_flat(A.flat() + h * dir);
      m.set_flat(A.flat() - h * dir);
      const double fd = (tv_smoothed(space, p, tau) - tv_smoothed(space, m, tau)) / (2 * h);
      CHECK(fd == doctest::Approx(g.dot(dir)).epsilon(1e-6));
    }
  }
}

TEST_CASE("objective, gradient and Jacobian of the data term") {
  const FeSpace space(square(3));
  const ElectrodeLayout layout = layout_from_mesh(space.mesh(), 2, 2);
  const NodalField truth = disk_phantom().interpolate_on(space);
  const Eigen::MatrixXd R0 = simplified_resistance_matrix(space, truth, layout);
  const InverseProblem exact(space, layout, R0, 0.3);
  CHECK(exact.num_electrodes() == 8);
  CHECK((exact.forward(truth) - R0).cwiseAbs().maxCoeff() <= 1e-12 * R0.cwiseAbs().maxCoeff());
  const ObjectiveParts at_truth = exact.objective(truth);
  CHECK(at_truth.misfit <= 1e-24);
  CHECK(at_truth.value == doctest::Approx(tv_seminorm(space, truth)));
  CHECK(exact.misfit_gradient(truth).cwiseAbs().maxCoeff() <= 1e-10);

  const InverseProblem prob(space, layout, noise_inject(R0, 0.02, 5, NoiseMode::absolute), 0.3);
  const NodalField flat = NodalField::constant(space.num_nodes(), 1.3, 0.5, 2.0);
  const ObjectiveParts p = prob.objective(flat, 0.01);
  CHECK(p.tv == 0.0);
  CHECK(p.value == doctest::Approx(p.misfit / 0.3));

  // Jacobian columns against central differences of the forward map
  const Eigen::MatrixXd J = prob.jacobian(truth);
  CHECK(J.rows() == 8 * 8);
  CHECK(J.cols() == space.num_nodes());
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd dir(space.num_nodes());
  for (Eigen::Index i = 0; i < dir.size(); ++i) dir[i] = u(rng);
  const double h = 1e-6;
  NodalField ap = truth, am = truth;
  ap.set_flat(truth.flat() + h * dir);
  am.set_flat(truth.flat() - h * dir);
  const Eigen::MatrixXd dR = (prob.forward(ap) - prob.forward(am)) / (2 * h);
  const Eigen::VectorXd jd = J * dir;
  const Eigen::Map<const Eigen::VectorXd> dv(dR.data(), dR.size());
  CHECK((jd - dv).norm() <= 1e-6 * dv.norm());

  // gradient of the misfit = 2 J^T (Rhat - R_meas)
  const Eigen::MatrixXd res = prob.forward(truth) - prob.data();
  const Eigen::Map<const Eigen::VectorXd> rv(res.data(), res.size());
  const Eigen::VectorXd g = 2.0 * J.transpose() * rv;
  CHECK((prob.misfit_gradient(truth) - g).norm() <= 1e-9 * g.norm());

  CHECK_THROWS_AS(InverseProblem(space, layout, Eigen::MatrixXd::Zero(3, 3), 0.3), ValidationError);
  CHECK_THROWS_AS(InverseProblem(space, layout, R0, 0.0), ValidationError);
  NodalField wrong = NodalField::constant(5, 1.0, 0.5, 2.0);
  CHECK_THROWS_AS(prob.objective(wrong), ValidationError);
}

TEST_CASE("minimize recovers a constant conductivity and never increases the objective") {
  const FeSpace space(square(3));
  const ElectrodeLayout layout = layout_from_mesh(space.mesh(), 2, 2);
  const NodalField truth = NodalField::constant(space.num_nodes(), 1.3, 0.5, 2.0);
  const Eigen::MatrixXd R0 = simplified_resistance_matrix(space, truth, layout);
  const InverseProblem prob(space, layout, R0, 1e-3);
  OptimizerSettings opt;
  opt.max_iterations = 60;
  const InversionResult r = minimize(prob, NodalField::constant(space.num_nodes(), 0.8, 0.5, 2.0), opt);
  CHECK(l1_distance(space, r.field, truth) <= 1e-3);
  CHECK(r.field.admissible());
  REQUIRE(r.trace.size() == static_cast<size_t>(r.iterations) + 1);
  for (size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i] <= r.trace[i - 1]);
  CHECK(r.misfit_frobenius == doctest::Approx(std::sqrt(r.misfit)));
  CHECK(r.misfit_spectral <= r.misfit_frobenius + 1e-15);

  // huge a: the TV term dominates
  const InverseProblem flat(space, layout, R0, 1e8);
  const NodalField bumpy = disk_phantom().interpolate_on(space);
  OptimizerSettings few = opt;
  few.max_iterations = 10;
  const InversionResult rf = minimize(flat, bumpy, few);
  CHECK(rf.tv <= tv_seminorm(space, bumpy));
  CHECK(rf.tv < 0.5 * tv_seminorm(space, bumpy));

  OptimizerSettings bad = opt;
  bad.tau_min = 1.0;
  CHECK_THROWS_AS(minimize(prob, truth, bad), ValidationError);
  bad = opt;
  bad.continuation = 1.0;
  CHECK_THROWS_AS(minimize(prob, truth, bad), ValidationError);
}

TEST_CASE("tensor inversion stays admissible and descends") {
  const FeSpace space(square(2));
  const ElectrodeLayout layout = layout_from_mesh(space.mesh(), 1, 2);
  NodalField truth = NodalField::constant_tensor(space.num_nodes(), Eigen::Matrix2d::Identity(), 0.5, 2.0);
  for (int i = 0; i < space.num_nodes(); ++i) {
    truth.values(i, 0) = 1.0 + 0.3 * space.mesh().vertex(i).x();
    truth.values(i, 1) = 0.1;
  }
  const Eigen::MatrixXd R0 = simplified_resistance_matrix(space, truth, layout);
  const InverseProblem prob(space, layout, R0, 1e-3);
  OptimizerSettings opt;
  opt.max_iterations = 10;
  const InversionResult r =
      minimize(prob, NodalField::constant_tensor(space.num_nodes(), 1.25 * Eigen::Matrix2d::Identity(), 0.5, 2.0), opt);
  CHECK(r.field.admissible(1e-12));
  CHECK(r.trace.back() < r.trace.front());
  for (size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i] <= r.trace[i - 1]);
}

TEST_CASE("run_inversion pipeline and study") {
  InversionConfig cfg;
  cfg.phantom = disk_phantom();
  cfg.use_schedule = false;
  cfg.mesh_level = 3;
  cfg.m = 1;
  cfg.k = 1;
  cfg.data_levels = 1;
  cfg.eps = 0.01;
  cfg.optimizer.max_iterations = 5;
  const RunOutcome a = run_inversion(cfg);
  const RunOutcome b = run_inversion(cfg);
  CHECK(a.R_meas == b.R_meas);
  CHECK(a.result.field.values == b.result.field.values);
  CHECK(a.choice.M == 16);
  CHECK(a.result.l1_error >= 0.0);
  CHECK((a.R_meas - a.R_clean).norm() == doctest::Approx(16 * 0.01));

  InversionConfig z = cfg;
  z.impedances = {0.1, 0.2};
  CHECK_THROWS_AS(run_inversion(z), ValidationError);
  z.impedances.assign(16, 0.2);
  CHECK_NOTHROW(run_inversion(z));
  InversionConfig badk = cfg;
  badk.k = 3;
  CHECK_THROWS_AS(run_inversion(badk), ValidationError);

  const StudyReport rep = convergence_study(cfg, {0.1, 0.05}, {1, 2});
  CHECK(rep.rows.size() == 4);
  std::ostringstream os;
  write_study_csv(os, rep);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "eps,a,h,delta,M,iterations,misfit_frobenius,misfit_spectral,tv,l1_error,wall_time_s");
  int rows = 0;
  while (std::getline(is, line)) {
    CHECK(std::count(line.begin(), line.end(), ',') == 10);
    ++rows;
  }
  CHECK(rows == 4);
  CHECK(rep.initial_l1 == doctest::Approx(0.5 * (rep.rows[0].l1_error + rep.rows[1].l1_error)));
  CHECK_THROWS_AS(convergence_study(cfg, {0.05, 0.1}, {1}), ValidationError);
  CHECK_THROWS_AS(convergence_study(cfg, {0.1}, {}), ValidationError);
}
