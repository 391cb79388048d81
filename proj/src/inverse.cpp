#include "eit/inverse.hpp"

#include "eit/errors.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <random>

namespace eit {

// ---------------------------------------------------------------------------
// Schedules

std::vector<std::string> validate_schedule(const Schedule& s) {
  std::vector<std::string> bad;
  const struct {
    const char* name;
    double v;
  } positive[] = {{"gamma>0", s.gamma}, {"a1>0", s.a1},       {"a2>0", s.a2},       {"c>0", s.c},
                  {"c0>0", s.c0},       {"c1>0", s.c1},       {"c2>0", s.c2},       {"alpha1>0", s.alpha1},
                  {"beta1>0", s.beta1}};
  for (const auto& p : positive) {
    if (!(p.v > 0.0) || !std::isfinite(p.v)) bad.emplace_back(p.name);
  }
  if (s.N < 2) bad.emplace_back("N>=2");
  if (s.mode == NoiseMode::absolute && !(s.c1 < s.c2)) bad.emplace_back("c1<c2");
  if (!(s.gamma < s.a2)) bad.emplace_back("gamma<a2");
  if (s.mode == NoiseMode::absolute) {
    if (!(s.gamma + 2.0 * (s.N - 1) * s.a2 < 2.0)) bad.emplace_back("gamma+2(N-1)a2<2");
  } else {
    if (!(s.gamma < 2.0)) bad.emplace_back("gamma<2");
  }
  if (!(s.gamma < 2.0 * s.a1 * s.alpha1)) bad.emplace_back("gamma<2*a1*alpha1");
  if (!(s.gamma < s.beta1)) bad.emplace_back("gamma<beta1");
  return bad;
}

ScheduleChoice schedule_apply(const Schedule& s, double eps, const TriMesh& base, int m, int k, double z) {
  const auto bad = validate_schedule(s);
  if (!bad.empty()) {
    std::string msg = "invalid schedule, violated:";
    for (const auto& b : bad) msg += " " + b;
    throw ValidationError(msg);
  }
  if (!(eps > 0.0 && eps <= 1.0)) throw ValidationError("noise level must lie in (0, 1]");
  if (base.level() != 0) throw ValidationError("schedules start from an unrefined mesh");
  ScheduleChoice c;
  c.eps = eps;
  c.a = s.c * std::pow(eps, s.gamma);
  c.h_target = s.c0 * std::pow(eps, s.a1);
  c.delta_hi = s.c2 * std::pow(eps, s.a2);
  c.delta_lo = s.mode == NoiseMode::absolute ? s.c1 * std::pow(eps, s.a2) : 0.0;

  const double h0 = mesh_quality(base).h;
  int nh = 0;
  while (h0 / std::ldexp(1.0, nh) > c.h_target * (1.0 + 1e-12)) {
    if (++nh > s.max_level) {
      throw ValidationError("mesh size target " + std::to_string(c.h_target) + " needs a level beyond the maximum " +
                            std::to_string(s.max_level));
    }
  }
  // Electrode diameters halve exactly under refinement: measure once at level m.
  const TriMesh at_m = refine(base, m);
  const double delta_m = layout_stats(at_m, layout_from_mesh(at_m, m, k, z, z, z)).delta;
  int ne = m;
  while (delta_m / std::ldexp(1.0, ne - m) > c.delta_hi * (1.0 + 1e-12)) {
    if (++ne > s.max_level) {
      throw ValidationError("electrode size target " + std::to_string(c.delta_hi) +
                            " needs a level beyond the maximum " + std::to_string(s.max_level));
    }
  }
  const double delta = delta_m / std::ldexp(1.0, ne - m);
  if (delta < c.delta_lo * (1.0 - 1e-12)) {
    throw ValidationError("no dyadic electrode size in [" + std::to_string(c.delta_lo) + ", " +
                          std::to_string(c.delta_hi) + "]; widen c1 < c2");
  }
  c.layout_level = ne;
  c.mesh_level = std::max(nh, ne);
  if (c.mesh_level > s.max_level) {
    throw ValidationError("schedule needs level " + std::to_string(c.mesh_level) + ", maximum is " +
                          std::to_string(s.max_level));
  }
  c.h = h0 / std::ldexp(1.0, c.mesh_level);
  c.delta = delta;
  const TriMesh at_ne = refine(at_m, ne - m);
  c.layout = layout_from_mesh(at_ne, m, k, z, z, z).on_level(c.mesh_level);
  c.M = c.layout.size();
  if (!(c.h <= c.h_target * (1.0 + 1e-12)) || !(c.delta <= c.delta_hi * (1.0 + 1e-12))) {
    throw NumericalError("schedule bracketing failed");
  }
  return c;
}

// ---------------------------------------------------------------------------
// Noise

Eigen::MatrixXd noise_inject(const Eigen::MatrixXd& R0, double eps, std::uint64_t seed, NoiseMode mode) {
  if (R0.rows() != R0.cols() || R0.rows() < 2) throw ValidationError("resistance matrix must be square, M >= 2");
  if (!(eps > 0.0 && eps <= 1.0)) throw ValidationError("noise level must lie in (0, 1]");
  const Eigen::Index M = R0.rows();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd E(M, M);
  for (Eigen::Index j = 0; j < M; ++j) {
    for (Eigen::Index i = 0; i < M; ++i) E(i, j) = u(rng);
  }
  const Eigen::VectorXd rows = E.rowwise().mean();
  const Eigen::RowVectorXd cols = E.colwise().mean();
  const double all = E.mean();
  E.colwise() -= rows;
  E.rowwise() -= cols;
  E.array() += all;
  const double n = mode == NoiseMode::absolute ? E.norm() : spectral_norm(E);
  if (!(n > 0.0)) throw NumericalError("degenerate noise draw");
  const double target = mode == NoiseMode::absolute ? static_cast<double>(M) * eps : eps;
  return R0 + (target / n) * E;
}

// ---------------------------------------------------------------------------
// Smoothed TV

double huber(double s, double tau) {
  if (tau <= 0.0) return std::abs(s);
  return s <= tau ? s * s / (2.0 * tau) : s - 0.5 * tau;
}

namespace {

Eigen::Vector2d triangle_gradient(const FeSpace& space, const NodalField& f, int t, int c) {
  const auto& tri = space.mesh().triangle(t);
  const auto& g = space.gradients(t);
  return g.col(0) * f.values(tri[0], c) + g.col(1) * f.values(tri[1], c) + g.col(2) * f.values(tri[2], c);
}

// Entrywise smoothed TV (t11, t12, t22) or (t, 0, 0).
Eigen::Vector3d tv_parts(const FeSpace& space, const NodalField& f, double tau) {
  Eigen::Vector3d tv = Eigen::Vector3d::Zero();
  for (int t = 0; t < space.mesh().num_triangles(); ++t) {
    for (int c = 0; c < f.components(); ++c) tv[c] += space.area(t) * huber(triangle_gradient(space, f, t, c).norm(), tau);
  }
  return tv;
}

// Weights d lambda_max / d (t11, t12, t22) of the entrywise TV matrix.
Eigen::Vector3d tensor_tv_weights(const Eigen::Vector3d& tv) {
  Eigen::Matrix2d T;
  T << tv[0], tv[1], tv[1], tv[2];
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(T);
  const Eigen::Vector2d v = es.eigenvectors().col(1);
  return {v[0] * v[0], 2.0 * v[0] * v[1], v[1] * v[1]};
}

double tv_combine(const NodalField& f, const Eigen::Vector3d& tv) {
  if (f.is_scalar()) return tv[0];
  const double m = 0.5 * (tv[0] + tv[2]);
  return m + std::hypot(0.5 * (tv[0] - tv[2]), tv[1]);
}

}  // namespace

double tv_smoothed(const FeSpace& space, const NodalField& field, double tau) {
  if (field.num_nodes() != space.num_nodes()) throw ValidationError("field does not match the mesh");
  return tv_combine(field, tv_parts(space, field, tau));
}

Eigen::VectorXd tv_gradient(const FeSpace& space, const NodalField& field, double tau) {
  if (!(tau > 0.0)) throw ValidationError("smoothing parameter must be positive");
  if (field.num_nodes() != space.num_nodes()) throw ValidationError("field does not match the mesh");
  const int comps = field.components();
  const Eigen::Vector3d w = field.is_scalar() ? Eigen::Vector3d(1, 0, 0) : tensor_tv_weights(tv_parts(space, field, tau));
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(field.num_nodes()) * comps);
  for (int t = 0; t < space.mesh().num_triangles(); ++t) {
    const auto& tri = space.mesh().triangle(t);
    const auto& G = space.gradients(t);
    for (int c = 0; c < comps; ++c) {
      if (w[c] == 0.0) continue;
      const Eigen::Vector2d gr = triangle_gradient(space, field, t, c);
      const double s = gr.norm();
      const Eigen::Vector2d dir = gr / std::max(s, tau);
      for (int k = 0; k < 3; ++k) g[tri[k] * comps + c] += w[c] * space.area(t) * dir.dot(G.col(k));
    }
  }
  return g;
}

namespace {

// Lagged-diffusivity Hessian of the smoothed TV over flat parameters.
SpMat tv_lagged_hessian(const FeSpace& space, const NodalField& field, double tau) {
  const int comps = field.components();
  const Eigen::Vector3d w = field.is_scalar() ? Eigen::Vector3d(1, 0, 0) : tensor_tv_weights(tv_parts(space, field, tau));
  std::vector<Eigen::Triplet<double>> trips;
  for (int t = 0; t < space.mesh().num_triangles(); ++t) {
    const auto& tri = space.mesh().triangle(t);
    const auto& G = space.gradients(t);
    const Eigen::Matrix3d local = G.transpose() * G * space.area(t);
    for (int c = 0; c < comps; ++c) {
      const double wc = std::abs(w[c]);
      if (wc == 0.0) continue;
      const double s = std::max(triangle_gradient(space, field, t, c).norm(), tau);
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) trips.emplace_back(tri[i] * comps + c, tri[j] * comps + c, wc * local(i, j) / s);
      }
    }
  }
  const Eigen::Index n = static_cast<Eigen::Index>(field.num_nodes()) * comps;
  SpMat H(n, n);
  H.setFromTriplets(trips.begin(), trips.end());
  return H;
}

}  // namespace

// ---------------------------------------------------------------------------
// The functional

struct InverseProblem::State {
  Eigen::MatrixXd U;      // S L: responses to the electrode loads
  Eigen::MatrixXd Z;      // U C^T
  Eigen::MatrixXd V;      // U P: responses to the completed current patterns
  Eigen::MatrixXd R_hat;
};

InverseProblem::InverseProblem(const FeSpace& space, const ElectrodeLayout& layout, Eigen::MatrixXd R_meas, double a)
    : space_(&space), ops_(space, layout), R_meas_(std::move(R_meas)), a_(a) {
  const int M = ops_.size();
  if (R_meas_.rows() != M || R_meas_.cols() != M) throw ValidationError("data matrix does not match the layout");
  if (!R_meas_.allFinite()) throw ValidationError("data matrix has non-finite entries");
  if (!(a > 0.0)) throw ValidationError("regularization parameter must be positive");
  const Eigen::VectorXd& meas = ops_.measure();
  centering_ = Eigen::MatrixXd::Identity(M, M) - meas * Eigen::RowVectorXd::Ones(M) / meas.sum();
  // Loads of the patterns e_j - e_M (as densities), then completion to R [1] = 0.
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(M, M - 1);
  for (int j = 0; j < M - 1; ++j) {
    D(j, j) = 1.0 / meas[j];
    D(M - 1, j) = -1.0 / meas[M - 1];
  }
  Eigen::MatrixXd T = Eigen::MatrixXd::Constant(M - 1, M, -1.0 / M);
  T.leftCols(M - 1) += Eigen::MatrixXd::Identity(M - 1, M - 1);
  patterns_ = D * T;
}

InverseProblem::State InverseProblem::evaluate(const NodalField& A) const {
  if (A.num_nodes() != space_->num_nodes()) throw ValidationError("field does not match the mesh");
  A.validate(1e-9);
  const NeumannSolver solver(*space_, A);
  State s;
  s.U = solver.solve_loads(ops_.node_loads());
  s.Z = s.U * centering_.transpose();
  s.V = s.U * patterns_;
  s.R_hat = centering_ * (ops_.node_loads().transpose() * s.V);
  if (!s.R_hat.allFinite()) throw NumericalError("forward solve produced non-finite values");
  return s;
}

Eigen::MatrixXd InverseProblem::forward(const NodalField& A) const { return evaluate(A).R_hat; }

ObjectiveParts InverseProblem::objective(const NodalField& A, double tau) const {
  ObjectiveParts p;
  p.misfit = (forward(A) - R_meas_).squaredNorm();
  p.tv = tv_smoothed(*space_, A, tau);
  p.value = p.misfit / a_ + p.tv;
  return p;
}

namespace {

// sum_b grad X_b . E_c grad Y_b on triangle t, for every component c.
Eigen::Vector3d paired_gradients(const FeSpace& space, int t, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) {
  const auto& tri = space.mesh().triangle(t);
  const auto& G = space.gradients(t);
  Eigen::Matrix<double, 3, Eigen::Dynamic> xs(3, X.cols()), ys(3, Y.cols());
  for (int k = 0; k < 3; ++k) {
    xs.row(k) = X.row(tri[k]);
    ys.row(k) = Y.row(tri[k]);
  }
  const Eigen::MatrixXd gx = G * xs;  // 2 x M
  const Eigen::MatrixXd gy = G * ys;
  const double xx = gx.row(0).dot(gy.row(0)), xy = gx.row(0).dot(gy.row(1));
  const double yx = gx.row(1).dot(gy.row(0)), yy = gx.row(1).dot(gy.row(1));
  return {xx, xy + yx, yy};
}

}  // namespace

Eigen::VectorXd InverseProblem::misfit_gradient(const NodalField& A) const {
  const State s = evaluate(A);
  const Eigen::MatrixXd W = s.Z * (s.R_hat - R_meas_);
  const int comps = A.components();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(A.num_nodes()) * comps);
  for (int t = 0; t < space_->mesh().num_triangles(); ++t) {
    const auto& tri = space_->mesh().triangle(t);
    const Eigen::Vector3d p = paired_gradients(*space_, t, W, s.V);
    const double f = -2.0 * space_->area(t) / 3.0;
    for (int k = 0; k < 3; ++k) {
      if (A.is_scalar()) {
        g[tri[k]] += f * (p[0] + p[2]);
      } else {
        for (int c = 0; c < 3; ++c) g[tri[k] * 3 + c] += f * p[c];
      }
    }
  }
  return g;
}

Eigen::VectorXd InverseProblem::gradient(const NodalField& A, double tau) const {
  return misfit_gradient(A) / a_ + tv_gradient(*space_, A, tau);
}

Eigen::MatrixXd InverseProblem::jacobian(const NodalField& A) const {
  const State s = evaluate(A);
  const int M = ops_.size();
  const int comps = A.components();
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(M) * M,
                                            static_cast<Eigen::Index>(A.num_nodes()) * comps);
  Eigen::MatrixXd B(M, M);
  for (int t = 0; t < space_->mesh().num_triangles(); ++t) {
    const auto& tri = space_->mesh().triangle(t);
    const auto& G = space_->gradients(t);
    Eigen::Matrix<double, 3, Eigen::Dynamic> zs(3, M), vs(3, M);
    for (int k = 0; k < 3; ++k) {
      zs.row(k) = s.Z.row(tri[k]);
      vs.row(k) = s.V.row(tri[k]);
    }
    const Eigen::MatrixXd gz = G * zs;
    const Eigen::MatrixXd gv = G * vs;
    const double f = -space_->area(t) / 3.0;
    for (int c = 0; c < comps; ++c) {
      if (A.is_scalar()) {
        B.noalias() = gz.transpose() * gv;
      } else if (c == 0) {
        B.noalias() = gz.row(0).transpose() * gv.row(0);
      } else if (c == 1) {
        B.noalias() = gz.row(0).transpose() * gv.row(1) + gz.row(1).transpose() * gv.row(0);
      } else {
        B.noalias() = gz.row(1).transpose() * gv.row(1);
      }
      const Eigen::Map<const Eigen::VectorXd> vb(B.data(), B.size());
      for (int k = 0; k < 3; ++k) J.col(tri[k] * comps + c) += f * vb;
    }
  }
  return J;
}

// ---------------------------------------------------------------------------
// Minimization

namespace {

NodalField with_flat(const NodalField& like, const Eigen::VectorXd& x) {
  NodalField f = like;
  f.set_flat(x);
  return f;
}

Eigen::VectorXd project_flat(const NodalField& like, const Eigen::VectorXd& x) {
  return project_to_admissible(with_flat(like, x)).flat();
}

struct Evaluated {
  Eigen::VectorXd x;
  double smooth = 0.0;  // objective with the current tau
  double exact = 0.0;
  double misfit = 0.0;
};

Evaluated evaluate_at(const InverseProblem& p, const NodalField& like, const Eigen::VectorXd& x, double tau) {
  const NodalField f = with_flat(like, x);
  Evaluated e;
  e.x = x;
  e.misfit = (p.forward(f) - p.data()).squaredNorm();
  e.smooth = e.misfit / p.a() + tv_smoothed(p.space(), f, tau);
  e.exact = e.misfit / p.a() + tv_smoothed(p.space(), f, 0.0);
  return e;
}

// Free variables for the Newton step: scalar nodes not held at a bound by the gradient.
std::vector<int> free_variables(const NodalField& like, const Eigen::VectorXd& x, const Eigen::VectorXd& g) {
  std::vector<int> idx;
  const double tol = 1e-12 * std::max(1.0, like.lambda1);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (like.is_scalar()) {
      if (x[i] <= like.lambda0 + tol && g[i] > 0.0) continue;
      if (x[i] >= like.lambda1 - tol && g[i] < 0.0) continue;
    }
    idx.push_back(static_cast<int>(i));
  }
  return idx;
}

}  // namespace

InversionResult minimize(const InverseProblem& problem, const NodalField& start, const OptimizerSettings& opt) {
  if (!(opt.tau0 > 0.0) || !(opt.tau_min > 0.0) || opt.tau_min > opt.tau0) {
    throw ValidationError("need 0 < tau_min <= tau0");
  }
  if (!(opt.continuation > 0.0 && opt.continuation < 1.0)) throw ValidationError("continuation factor must lie in (0, 1)");
  if (opt.max_iterations < 0) throw ValidationError("iteration cap must be nonnegative");
  const FeSpace& space = problem.space();
  const NodalField like = project_to_admissible(start);
  double tau = opt.tau0;
  Evaluated cur = evaluate_at(problem, like, like.flat(), tau);

  InversionResult res;
  res.trace.push_back(cur.exact);
  double mu = 1e-3;
  int passes = 0;
  const int max_passes = 4 * opt.max_iterations + 64;
  bool converged = false;

  auto lower_tau = [&]() {
    if (tau <= opt.tau_min) return false;
    tau = std::max(opt.tau_min, tau * opt.continuation);
    cur = evaluate_at(problem, like, cur.x, tau);
    return true;
  };

  while (res.iterations < opt.max_iterations && passes++ < max_passes) {
    const NodalField f = with_flat(like, cur.x);
    const Eigen::VectorXd g = problem.gradient(f, tau);
    const double pg = (cur.x - project_flat(like, cur.x - g)).norm();
    res.grad_norm = pg;
    if (pg <= opt.grad_tol) {
      if (!lower_tau()) {
        converged = true;
        break;
      }
      continue;
    }

    auto try_direction = [&](const Eigen::VectorXd& d) -> bool {
      double t = 1.0;
      for (int b = 0; b <= opt.max_backtracks; ++b, t *= 0.5) {
        const Eigen::VectorXd xn = project_flat(like, cur.x + t * d);
        const Eigen::VectorXd step = xn - cur.x;
        const double slope = g.dot(step);
        if (step.norm() <= 1e-15 * (1.0 + cur.x.norm())) return false;
        if (slope >= 0.0) continue;
        const Evaluated cand = evaluate_at(problem, like, xn, tau);
        if (cand.smooth <= cur.smooth + opt.armijo * slope && cand.exact <= cur.exact) {
          cur = cand;
          return true;
        }
      }
      return false;
    };

    const double before = cur.smooth;
    bool accepted = false;
    if (opt.gauss_newton) {
      const Eigen::MatrixXd J = problem.jacobian(f);
      const std::vector<int> freev = free_variables(like, cur.x, g);
      const int nf = static_cast<int>(freev.size());
      if (nf > 0) {
        Eigen::MatrixXd Jf(J.rows(), nf);
        Eigen::VectorXd gf(nf);
        for (int i = 0; i < nf; ++i) {
          Jf.col(i) = J.col(freev[static_cast<size_t>(i)]);
          gf[i] = g[freev[static_cast<size_t>(i)]];
        }
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(nf, nf);
        H.selfadjointView<Eigen::Lower>().rankUpdate(Jf.transpose(), 2.0 / problem.a());
        const Eigen::MatrixXd Htv = Eigen::MatrixXd(tv_lagged_hessian(space, f, tau));
        for (int j = 0; j < nf; ++j) {
          for (int i = j; i < nf; ++i) H(i, j) += Htv(freev[static_cast<size_t>(i)], freev[static_cast<size_t>(j)]);
        }
        H = H.selfadjointView<Eigen::Lower>();
        const Eigen::VectorXd diag = H.diagonal().cwiseMax(1e-12 * std::max(1.0, H.diagonal().maxCoeff()));
        for (int attempt = 0; attempt < 8 && !accepted; ++attempt) {
          Eigen::MatrixXd Hm = H;
          Hm.diagonal() += mu * diag;
          const Eigen::LDLT<Eigen::MatrixXd> ldlt(Hm);
          const Eigen::VectorXd df = ldlt.solve(-gf);
          if (ldlt.info() == Eigen::Success && df.allFinite()) {
            Eigen::VectorXd d = Eigen::VectorXd::Zero(g.size());
            for (int i = 0; i < nf; ++i) d[freev[static_cast<size_t>(i)]] = df[i];
            accepted = try_direction(d);
          }
          if (accepted) {
            mu = std::max(mu / 3.0, 1e-12);
          } else {
            mu *= 10.0;
          }
        }
      }
    }
    if (!accepted) {
      const double gmax = g.cwiseAbs().maxCoeff();
      if (gmax > 0.0) accepted = try_direction(-g * (0.25 * (like.lambda1 - like.lambda0) / gmax));
    }
    if (!accepted) {
      if (!lower_tau()) {
        res.warning = true;
        res.message = "line search failed at the smallest smoothing parameter";
        break;
      }
      continue;
    }
    ++res.iterations;
    res.trace.push_back(cur.exact);
    res.tau.push_back(tau);
    const double rel = (before - cur.smooth) / std::max(std::abs(before), 1e-300);
    if (rel < opt.stagnation) lower_tau();
  }
  if (!converged && !res.warning && res.message.empty()) {
    res.message = res.iterations >= opt.max_iterations ? "iteration cap reached" : "pass cap reached";
  } else if (converged) {
    res.message = "converged";
  }

  res.field = with_flat(like, cur.x);
  const Eigen::MatrixXd diff = problem.forward(res.field) - problem.data();
  res.misfit = diff.squaredNorm();
  res.misfit_frobenius = std::sqrt(res.misfit);
  res.misfit_spectral = spectral_norm(diff);
  res.tv = tv_seminorm(space, res.field);
  return res;
}

// ---------------------------------------------------------------------------
// Pipeline

void InversionConfig::validate() const {
  domain.validate();
  phantom.validate();
  if (!(eps > 0.0 && eps <= 1.0)) throw ValidationError("noise level must lie in (0, 1]");
  if (!(optimizer.tau0 > 0.0)) throw ValidationError("smoothing parameter must be positive");
  if (mesh_level < 0 || data_levels < 0) throw ValidationError("levels must be nonnegative");
  if (m < 0 || k < 1 || k > (1 << std::min(m, 20))) throw ValidationError("layout needs 1 <= k <= 2^m");
  if (use_schedule) {
    const auto bad = validate_schedule(schedule);
    if (!bad.empty()) {
      std::string msg = "invalid schedule, violated:";
      for (const auto& b : bad) msg += " " + b;
      throw ValidationError(msg);
    }
  }
}

RunOutcome run_inversion(const InversionConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const TriMesh base = build_initial_triangulation(cfg.domain);
  RunOutcome out;
  ScheduleChoice& c = out.choice;
  if (cfg.use_schedule) {
    c = schedule_apply(cfg.schedule, cfg.eps, base, cfg.m, cfg.k, cfg.z);
    if (cfg.schedule.max_level < c.mesh_level) throw ValidationError("schedule exceeds the maximum level");
  } else {
    c.eps = cfg.eps;
    c.a = cfg.schedule.c * std::pow(cfg.eps, cfg.schedule.gamma);
    c.mesh_level = c.layout_level = cfg.mesh_level;
    const TriMesh mesh = refine(base, cfg.mesh_level);
    c.layout = layout_from_mesh(mesh, cfg.m, cfg.k, cfg.z, cfg.z_min, cfg.z_max);
    c.h = mesh_quality(mesh).h;
    c.delta = layout_stats(mesh, c.layout).delta;
    c.M = c.layout.size();
  }
  c.layout.z_min = cfg.z_min;
  c.layout.z_max = cfg.z_max;
  if (!cfg.impedances.empty()) {
    if (static_cast<int>(cfg.impedances.size()) != c.M) {
      throw ValidationError("impedance list has " + std::to_string(cfg.impedances.size()) + " entries for " +
                            std::to_string(c.M) + " electrodes");
    }
    c.layout.impedance = cfg.impedances;
  }
  const FeSpace space(refine(base, c.mesh_level));
  c.layout.validate(space.mesh());
  NodalField truth;
  if (cfg.inverse_crime) {
    truth = cfg.phantom.interpolate_on(space);
    out.R_clean = simplified_resistance_matrix(space, truth, c.layout);
  } else {
    const FeSpace fine(refine(space.mesh(), cfg.data_levels));
    out.R_clean = resistance_matrix(fine, cfg.phantom.interpolate_on(fine), c.layout.on_level(fine.mesh().level()));
  }
  out.R_meas = noise_inject(out.R_clean, cfg.eps, cfg.seed, cfg.schedule.mode);

  const InverseProblem problem(space, c.layout, out.R_meas, c.a);
  const double mid = 0.5 * (cfg.phantom.lambda0 + cfg.phantom.lambda1);
  const NodalField start =
      cfg.tensor ? NodalField::constant_tensor(space.num_nodes(), mid * Eigen::Matrix2d::Identity(), cfg.phantom.lambda0,
                                               cfg.phantom.lambda1)
                 : NodalField::constant(space.num_nodes(), mid, cfg.phantom.lambda0, cfg.phantom.lambda1);
  out.result = minimize(problem, start, cfg.optimizer);
  if (cfg.inverse_crime && !cfg.tensor) {
    out.result.l1_error = l1_distance(space, out.result.field, truth);
  } else {
    out.result.l1_error = l1_distance(space, out.result.field, cfg.phantom);
  }
  out.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

StudyReport convergence_study(const InversionConfig& base, const std::vector<double>& eps,
                              const std::vector<std::uint64_t>& seeds, double slack) {
  if (eps.empty()) throw ValidationError("empty noise level list");
  if (seeds.empty()) throw ValidationError("empty seed list");
  for (size_t i = 1; i < eps.size(); ++i) {
    if (!(eps[i] < eps[i - 1])) throw ValidationError("noise levels must be strictly decreasing");
  }
  StudyReport rep;
  rep.slack = slack;
  std::vector<double> mean_l1;
  for (double e : eps) {
    double sum = 0.0;
    int ok = 0;
    for (std::uint64_t seed : seeds) {
      StudyRow row;
      row.eps = e;
      row.seed = seed;
      InversionConfig cfg = base;
      cfg.eps = e;
      cfg.seed = seed;
      try {
        const RunOutcome r = run_inversion(cfg);
        row.a = r.choice.a;
        row.h = r.choice.h;
        row.delta = r.choice.delta;
        row.M = r.choice.M;
        row.iterations = r.result.iterations;
        row.misfit_frobenius = r.result.misfit_frobenius;
        row.misfit_spectral = r.result.misfit_spectral;
        row.tv = r.result.tv;
        row.l1_error = r.result.l1_error;
        row.wall_time_s = r.wall_time_s;
        sum += row.l1_error;
        ++ok;
      } catch (const std::exception& ex) {
        row.error = ex.what();
        const double nan = std::numeric_limits<double>::quiet_NaN();
        row.a = row.h = row.delta = row.misfit_frobenius = row.misfit_spectral = row.tv = row.l1_error = nan;
      }
      rep.rows.push_back(row);
    }
    mean_l1.push_back(ok > 0 ? sum / ok : std::numeric_limits<double>::quiet_NaN());
  }
  rep.initial_l1 = mean_l1.front();
  rep.final_l1 = mean_l1.back();
  for (size_t i = 1; i < mean_l1.size(); ++i) {
    if (!(mean_l1[i] <= (1.0 + slack) * mean_l1[i - 1])) rep.monotone_within_slack = false;
  }
  if (!std::isfinite(rep.initial_l1) || !std::isfinite(rep.final_l1)) rep.monotone_within_slack = false;
  return rep;
}

void write_study_csv(std::ostream& os, const StudyReport& report) {
  os << "eps,a,h,delta,M,iterations,misfit_frobenius,misfit_spectral,tv,l1_error,wall_time_s\n";
  char buf[512];
  for (const auto& r : report.rows) {
    std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.10g,%.10g,%d,%d,%.10g,%.10g,%.10g,%.10g,%.3f\n", r.eps, r.a, r.h,
                  r.delta, r.M, r.iterations, r.misfit_frobenius, r.misfit_spectral, r.tv, r.l1_error, r.wall_time_s);
    os << buf;
  }
}

}  // namespace eit
