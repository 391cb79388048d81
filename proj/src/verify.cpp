#include "eit/verify.hpp"

#include "eit/cem.hpp"
#include "eit/conductivity.hpp"
#include "eit/errors.hpp"
#include "eit/fem.hpp"
#include "eit/mesh.hpp"
#include "eit/ntd.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>
#include <random>
#include <sstream>

namespace eit {

namespace {

TriMesh square(int level) { return refine(build_initial_triangulation(Polygon::unit_square()), level); }

Phantom disk_phantom() {
  Phantom p;
  p.background = 1.0;
  p.lambda0 = 0.5;
  p.lambda1 = 2.0;
  p.disks.push_back({Point(0.5, 0.5), 0.2, 1.8});
  return p;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string list(const std::vector<double>& v) {
  std::string s = "[";
  for (size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + num(v[i]);
  return s + "]";
}

Eigen::VectorXd random_vector(std::mt19937_64& rng, Eigen::Index n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

// sqrt of the largest lambda with num x = lambda den x (den SPD).
double gen_norm(const Eigen::MatrixXd& num_m, const Eigen::MatrixXd& den) {
  const Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(num_m, den);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

// Orthogonal projector of D onto mean-free functions.
Eigen::MatrixXd mean_free(const FeSpace& space) {
  const Eigen::VectorXd one = space.dconstant();
  const Eigen::VectorXd w = space.dmass() * one;
  return Eigen::MatrixXd::Identity(space.boundary_dim(), space.boundary_dim()) - one * w.transpose() / w.dot(one);
}

double rel_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double scale = std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff());
  return scale > 0.0 ? (a - b).cwiseAbs().maxCoeff() / scale : 0.0;
}

template <class F>
CheckResult timed(const std::string& id, const std::string& name, double budget, F&& body) {
  CheckResult r;
  r.id = id;
  r.name = name;
  r.budget_s = budget;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(r);
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget > 0.0 && r.seconds > budget) {
    r.passed = false;
    r.detail += " [over budget " + num(budget) + " s]";
  }
  return r;
}

}  // namespace

CheckResult check_adjoint() {
  return timed("1", "adjoint identity", 1.0, [](CheckResult& r) {
    const FeSpace space(square(4));
    const ElectrodeOperators ops(space, layout_from_mesh(space.mesh(), 1, 1));
    const Eigen::MatrixXd EP = ops.e_p(), Q = ops.q();
    std::mt19937_64 rng(2024);
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
      const Eigen::VectorXd f = space.dcenter(random_vector(rng, space.boundary_dim()));
      const Eigen::VectorXd g = space.dcenter(random_vector(rng, space.boundary_dim()));
      worst = std::max(worst, std::abs(space.dinner(EP * f, g) - space.dinner(f, Q * g)));
    }
    r.passed = worst <= 1e-12;
    r.detail = "max defect " + num(worst) + " (tol 1e-12)";
  });
}

CheckResult check_operator_norms() {
  return timed("2", "operator-norm bounds", 5.0, [](CheckResult& r) {
    double worst = -1e300;
    int layouts = 0;
    for (int level = 2; level <= 5; ++level) {
      const FeSpace space(square(level));
      for (int m = 0; m <= std::min(level, 3); ++m) {
        for (int k = 1; k <= (1 << m); ++k) {
          const ElectrodeLayout l = layout_from_mesh(space.mesh(), m, k);
          const ElectrodeOperators ops(space, l);
          const double root_theta = std::sqrt(layout_stats(space.mesh(), l).theta);
          const double nq = operator_norm(space, ops.q());
          const int M = ops.size();
          Eigen::MatrixXd X(space.boundary_dim(), M);
          for (int j = 0; j < M; ++j) X.col(j) = ops.extend(Eigen::VectorXd::Unit(M, j));
          const Eigen::MatrixXd den = ops.measure().cwiseInverse().asDiagonal();
          const double ne = gen_norm(X.transpose() * space.dmass() * X, den);
          worst = std::max({worst, nq - root_theta, ne - root_theta});
          ++layouts;
        }
      }
    }
    r.passed = worst <= 1e-9;
    r.detail = std::to_string(layouts) + " layouts, max(norm - sqrt(theta)) = " + num(worst) + " (tol 1e-9)";
  });
}

CheckResult check_delta_rates() {
  return timed("3", "delta^(1/2) rates", 300.0, [](CheckResult& r) {
    const FeSpace space(square(7));
    const Eigen::MatrixXd C = mean_free(space);
    const Eigen::VectorXd f =
        space.dcenter(BoundaryFunction::from_function(space, [](const Point& p) {
                        return std::cos(2.0 * p.x() + p.y()) + p.x() * p.y();
                      }).coeffs);
    const Phantom disk = disk_phantom();
    const NodalField one = NodalField::constant(space.num_nodes(), 1.0, 0.5, 2.0);
    const NodalField dsk = disk.interpolate_on(space);
    const NeumannSolver s1(space, one), s2(space, dsk);
    const Eigen::MatrixXd N1 = ntd_assemble(s1, space.mesh().level()).on_boundary_space();
    const Eigen::MatrixXd N2 = ntd_assemble(s2, space.mesh().level()).on_boundary_space();

    std::vector<double> delta, ep_err, ntd1, ntd2, rr1, rr2;
    for (int m = 2; m <= 5; ++m) {
      const ElectrodeLayout l = layout_from_mesh(space.mesh(), m, 1 << (m - 1));
      const ElectrodeOperators ops(space, l);
      delta.push_back(layout_stats(space.mesh(), l).delta);
      ep_err.push_back(space.dnorm(f - ops.e_p() * f));
      for (int which = 0; which < 2; ++which) {
        const NodalField& A = which ? dsk : one;
        const NeumannSolver& ns = which ? s2 : s1;
        const Eigen::MatrixXd& N = which ? N2 : N1;
        const Eigen::MatrixXd R = resistance_matrix(space, A, l);
        const Eigen::MatrixXd Rh = simplified_resistance_matrix(ns, ops);
        (which ? ntd2 : ntd1).push_back(operator_norm(space, C * (N - ops.e_r_q(R)) * C));
        (which ? rr2 : rr1).push_back(pc_operator_norm(Rh - R, ops.measure()));
      }
    }
    const double s_ep = loglog_fit(delta, ep_err).slope;
    const double s_t1 = loglog_fit(delta, ntd1).slope, s_t2 = loglog_fit(delta, ntd2).slope;
    const double s_p1 = loglog_fit(delta, rr1).slope, s_p2 = loglog_fit(delta, rr2).slope;
    r.passed = std::min({s_ep, s_t1, s_t2, s_p1, s_p2}) >= 0.4;
    r.detail = "delta " + list(delta) + "; slopes (1-EP)f " + num(s_ep) + ", N-ERQ " + num(s_t1) + "/" +
               num(s_t2) + ", Rhat-R " + num(s_p1) + "/" + num(s_p2) + " (sigma=1/disk, need >= 0.4)";
  });
}

CheckResult check_fem_convergence() {
  return timed("4", "FEM convergence", 120.0, [](CheckResult& r) {
    const auto sigma = [](const Point& p) { return 1.0 + 0.5 * std::sin(M_PI * p.x()) * std::sin(M_PI * p.y()); };
    const ConvergenceReport rep =
        fem_convergence_check(build_initial_triangulation(Polygon::unit_square()), sigma, 0.5, 2.0, {2, 3, 4, 5});
    r.passed = rep.monotone && rep.slope >= 0.5;
    r.detail = "errors " + list(rep.error) + " vs level " + std::to_string(rep.reference_level) + ", slope " +
               num(rep.slope) + (rep.monotone ? ", monotone" : ", NOT monotone") + " (need >= 0.5)";
  });
}

CheckResult check_discretization() {
  return timed("5", "discretization of the unknown", 60.0, [](CheckResult& r) {
    const Phantom p = disk_phantom();
    const FieldSource src = source_from(p);
    const double exact = p.exact_tv();
    std::vector<double> l1, gap;
    for (int level = 4; level <= 7; ++level) {
      const FeSpace space(square(level));
      const NodalField a = discretize_bv(src, Polygon::unit_square(), space, 0.45);
      l1.push_back(l1_distance(space, a, p));
      gap.push_back(std::abs(tv_seminorm(space, a) - exact));
    }
    bool dec = true, gdec = true;
    for (size_t i = 1; i < l1.size(); ++i) {
      dec = dec && l1[i] < l1[i - 1];
      gdec = gdec && gap[i] < gap[i - 1];
    }
    const double rel = gap.back() / exact;
    r.passed = dec && gdec && rel <= 0.15;
    r.detail = "L1 " + list(l1) + (dec ? " decreasing" : " NOT decreasing") + "; |tv - exact| " + list(gap) +
               (gdec ? " decreasing" : " NOT decreasing") + ", final " + num(100.0 * rel) + "% (need <= 15%)";
  });
}

CheckResult check_mollification() {
  return timed("6", "mollification rate", 60.0, [](CheckResult& r) {
    const Phantom p = disk_phantom();
    const FieldSource src = source_from(p);
    const std::vector<double> gammas{0.08, 0.04, 0.02, 0.01};
    // midpoint rule on a 1024^2 grid; the raster is smooth at scale gamma
    const int n = 1024;
    std::vector<double> l1;
    for (double g : gammas) {
      const RasterField ras = mollify(src, Polygon::unit_square(), g);
      double sum = 0.0;
      for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
          const Point x((i + 0.5) / n, (j + 0.5) / n);
          sum += std::abs(ras.sample(x)[0] - p.value(x));
        }
      }
      l1.push_back(sum / (double(n) * n));
    }
    const double slope = loglog_fit(gammas, l1).slope;
    r.passed = slope >= 0.8 && slope <= 1.2;
    r.detail = "L1 " + list(l1) + ", slope " + num(slope) + " (need [0.8, 1.2])";
  });
}

CheckResult check_gradient() {
  return timed("7", "gradient correctness", 120.0, [](CheckResult& r) {
    const FeSpace space(square(3));
    const ElectrodeLayout layout = layout_from_mesh(space.mesh(), 2, 2);
    const Phantom ph = disk_phantom();
    const NodalField truth = ph.interpolate_on(space);
    const Eigen::MatrixXd R0 = simplified_resistance_matrix(space, truth, layout);
    const Eigen::MatrixXd Rm = noise_inject(R0, 0.01, 3, NoiseMode::absolute);
    const InverseProblem prob(space, layout, Rm, 0.5);
    const double tau = 1e-2;

    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const int n = space.num_nodes();
    std::vector<NodalField> fields;
    fields.push_back(NodalField::constant(n, 1.2, 0.5, 2.0));
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) {
      const Point& x = space.mesh().vertex(i);
      v[i] = 1.2 + 0.3 * std::sin(3.0 * x.x()) * std::cos(2.0 * x.y()) + 0.05 * u(rng);
    }
    fields.push_back(NodalField::scalar_from(v, 0.5, 2.0));
    NodalField ten = NodalField::constant_tensor(n, Eigen::Matrix2d::Identity(), 0.5, 2.0);
    for (int i = 0; i < n; ++i) {
      const Point& x = space.mesh().vertex(i);
      ten.values(i, 0) = 1.2 + 0.2 * x.x();
      ten.values(i, 1) = 0.15 * std::sin(2.0 * x.y()) + 0.02 * u(rng);
      ten.values(i, 2) = 1.1 + 0.2 * x.y() * x.x();
    }
    fields.push_back(ten);

    double worst = 0.0;
    for (const NodalField& A : fields) {
      const Eigen::VectorXd g = prob.gradient(A, tau);
      for (int d = 0; d < 10; ++d) {
        const Eigen::VectorXd dir = random_vector(rng, g.size()).normalized();
        const double h = 1e-6;
        NodalField ap = A, am = A;
        ap.set_flat(A.flat() + h * dir);
        am.set_flat(A.flat() - h * dir);
        const double fd = (prob.objective(ap, tau).value - prob.objective(am, tau).value) / (2.0 * h);
        const double ad = g.dot(dir);
        worst = std::max(worst, std::abs(fd - ad) / std::max(std::abs(ad), 1e-12));
      }
    }
    r.passed = worst <= 1e-4;
    r.detail = "max relative error " + num(worst) + " over 30 directions (tol 1e-4)";
  });
}

CheckResult check_scaling() {
  return timed("8", "scaling laws", 10.0, [](CheckResult& r) {
    const FeSpace space(square(4));
    const NodalField A = disk_phantom().interpolate_on(space);
    const ElectrodeLayout layout = layout_from_mesh(space.mesh(), 2, 3);
    double worst = 0.0;
    for (double c : {0.5, 1.7}) {
      const NodalField cA = A.scaled(c);
      worst = std::max(worst, rel_diff(ntd_assemble(space, cA).green, ntd_assemble(space, A).green / c));
      worst = std::max(worst, rel_diff(simplified_resistance_matrix(space, cA, layout),
                                       simplified_resistance_matrix(space, A, layout) / c));
      const BoundaryFunction g = BoundaryFunction::from_function(space, [](const Point& p) {
                                   return p.x() - 0.3 * p.y() * p.y();
                                 }).centered(space);
      worst = std::max(worst, rel_diff(solve_neumann(space, cA, g).values, solve_neumann(space, A, g).values / c));
      BoundaryFunction g2 = g;
      g2.coeffs *= c;
      worst = std::max(worst, rel_diff(solve_neumann(space, A, g2).values, c * solve_neumann(space, A, g).values));
    }
    r.passed = worst <= 1e-10;
    r.detail = "max relative deviation " + num(worst) + " (tol 1e-10)";
  });
}

InversionConfig reference_study_config() {
  InversionConfig c;
  // Conductivities in units where the disk phantom reads 0.02 / 0.036; with
  // absolute noise this sets the data-to-noise ratio (R scales like 1/sigma).
  c.phantom.background = 0.02;
  c.phantom.lambda0 = 0.01;
  c.phantom.lambda1 = 0.04;
  c.phantom.disks.push_back({Point(0.5, 0.5), 0.2, 0.036});
  c.m = 2;
  c.k = 2;
  c.z = 0.1;
  c.use_schedule = true;
  c.schedule.gamma = 0.05;
  c.schedule.a1 = 0.5;
  c.schedule.a2 = 0.5;
  c.schedule.alpha1 = 0.5;
  c.schedule.beta1 = 0.1;
  c.schedule.c = 1.0;
  c.schedule.c0 = 0.5;
  c.schedule.c1 = 0.2;
  c.schedule.c2 = 1.0;
  c.schedule.mode = NoiseMode::absolute;
  c.data_levels = 2;
  c.optimizer.max_iterations = 40;
  return c;
}

InversionConfig reference_crime_config() {
  InversionConfig c;
  c.phantom = disk_phantom();
  c.use_schedule = false;
  c.mesh_level = 4;
  c.m = 2;
  c.k = 4;
  c.eps = 1e-12;
  c.schedule.c = 1e-7;
  c.inverse_crime = true;
  c.optimizer.max_iterations = 100;
  c.optimizer.tau_min = 1e-8;
  return c;
}

CheckResult check_end_to_end() {
  return timed("9", "end-to-end noise study (monotone-decay surrogate)", 1800.0, [](CheckResult& r) {
    const StudyReport rep = convergence_study(reference_study_config(), {0.1, 0.05, 0.025, 0.0125}, {1, 2, 3}, 0.1);
    std::vector<double> means;
    for (size_t i = 0; i < rep.rows.size(); i += 3) {
      double s = 0.0;
      for (size_t j = i; j < i + 3; ++j) s += rep.rows[j].l1_error;
      means.push_back(s / 3.0);
    }
    const bool halved = rep.final_l1 < 0.5 * rep.initial_l1;
    r.passed = rep.monotone_within_slack && halved;
    std::string misfits;
    for (size_t i = 0; i < rep.rows.size(); i += 3) {
      misfits += (i ? " " : "") + num(rep.rows[i].misfit_frobenius) + "/" + num(rep.rows[i].misfit_spectral);
    }
    r.detail = "mean l1 " + list(means) + (rep.monotone_within_slack ? " monotone within 10%" : " NOT monotone") +
               ", final/initial " + num(rep.final_l1 / rep.initial_l1) + " (need < 0.5); misfit F/2 (seed 1) [" +
               misfits + "]";
  });
}

CheckResult check_inverse_crime() {
  return timed("10", "noise-free inverse-crime self-test", 600.0, [](CheckResult& r) {
    const InversionConfig cfg = reference_crime_config();
    const RunOutcome o = run_inversion(cfg);
    const double range = cfg.phantom.max_value() - cfg.phantom.min_value();
    const double bound = 0.05 * range * cfg.domain.signed_area();
    r.passed = o.result.misfit <= 1e-8 && o.result.l1_error <= bound;
    r.detail = "misfit " + num(o.result.misfit) + " (tol 1e-8), l1 " + num(o.result.l1_error) + " (tol " +
               num(bound) + "), " + std::to_string(o.result.iterations) + " iterations";
  });
}

std::vector<CheckResult> check_invariants() {
  std::vector<CheckResult> out;
  out.push_back(timed("mesh", "mesh counts, quality and round trip", 0.0, [](CheckResult& r) {
    const TriMesh m3 = square(3);
    const double s3 = mesh_quality(m3).s, s5 = mesh_quality(square(5)).s;
    std::stringstream ss;
    write_mesh(ss, m3);
    const TriMesh back = read_mesh(ss, 3);
    const bool same = back.num_triangles() == m3.num_triangles() && back.num_vertices() == m3.num_vertices();
    r.passed = m3.num_triangles() == 128 && std::abs(s3 - s5) <= 1e-12 && same && audit_conformity(m3).empty();
    r.detail = std::to_string(m3.num_triangles()) + " triangles at level 3, shape drift " + num(std::abs(s3 - s5));
  }));
  out.push_back(timed("cem", "resistance matrices annihilate constants", 0.0, [](CheckResult& r) {
    const FeSpace space(square(4));
    const NodalField A = disk_phantom().interpolate_on(space);
    const ElectrodeLayout l = layout_from_mesh(space.mesh(), 2, 2);
    const Eigen::MatrixXd R = resistance_matrix(space, A, l), Rh = simplified_resistance_matrix(space, A, l);
    const double scale = std::max(R.cwiseAbs().maxCoeff(), Rh.cwiseAbs().maxCoeff());
    const double d = std::max({(R * Eigen::VectorXd::Ones(R.cols())).cwiseAbs().maxCoeff(),
                               (R.transpose() * Eigen::VectorXd::Ones(R.rows())).cwiseAbs().maxCoeff(),
                               (Rh * Eigen::VectorXd::Ones(Rh.cols())).cwiseAbs().maxCoeff()}) /
                     scale;
    r.passed = d <= 1e-10;
    r.detail = "relative row/column sums " + num(d);
  }));
  out.push_back(timed("pc", "Q is the identity on PC", 0.0, [](CheckResult& r) {
    const FeSpace space(square(4));
    const ElectrodeOperators ops(space, layout_from_mesh(space.mesh(), 2, 3));
    std::mt19937_64 rng(9);
    const Eigen::VectorXd pc = ops.p_e() * random_vector(rng, space.boundary_dim());
    const double d = (ops.q() * pc - pc).cwiseAbs().maxCoeff();
    r.passed = d <= 1e-12;
    r.detail = "max deviation " + num(d);
  }));
  out.push_back(timed("noise", "noise level and determinism", 0.0, [](CheckResult& r) {
    const Eigen::MatrixXd R0 = Eigen::MatrixXd::Zero(8, 8);
    const Eigen::MatrixXd a = noise_inject(R0, 0.1, 4, NoiseMode::absolute);
    const Eigen::MatrixXd b = noise_inject(R0, 0.1, 4, NoiseMode::absolute);
    const Eigen::MatrixXd c = noise_inject(R0, 0.1, 4, NoiseMode::relative);
    const double fro = a.norm(), spec = spectral_norm(c);
    r.passed = a == b && std::abs(fro - 0.8) <= 1e-12 && std::abs(spec - 0.1) <= 1e-12 &&
               a.rowwise().sum().cwiseAbs().maxCoeff() <= 1e-14;
    r.detail = "Frobenius " + num(fro) + " (expect 0.8), spectral " + num(spec) + " (expect 0.1)";
  }));
  return out;
}

SuiteLevel parse_suite_level(const std::string& s) {
  if (s == "quick") return SuiteLevel::quick;
  if (s == "full") return SuiteLevel::full;
  throw ValidationError("verify level must be 'quick' or 'full', got '" + s + "'");
}

std::vector<CheckResult> run_suite(SuiteLevel level, std::ostream* progress) {
  std::vector<std::function<CheckResult()>> checks{check_adjoint, check_operator_norms, check_gradient, check_scaling};
  if (level == SuiteLevel::full) {
    checks.insert(checks.end(), {check_delta_rates, check_fem_convergence, check_discretization, check_mollification,
                                 check_end_to_end, check_inverse_crime});
  }
  std::vector<CheckResult> out;
  for (CheckResult& r : check_invariants()) {
    if (progress) *progress << format_result(r) << '\n' << std::flush;
    out.push_back(std::move(r));
  }
  for (const auto& c : checks) {
    out.push_back(c());
    if (progress) *progress << format_result(out.back()) << '\n' << std::flush;
  }
  return out;
}

std::string format_result(const CheckResult& r) {
  char t[32];
  std::snprintf(t, sizeof t, "%.2f", r.seconds);
  return std::string(r.passed ? "PASS " : "FAIL ") + r.id + " " + r.name + ": " + r.detail + " (" + t + " s)";
}

}  // namespace eit
