#include "eit/ntd.hpp"

#include "eit/errors.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace eit {

using Triplet = Eigen::Triplet<double>;

Eigen::MatrixXd NtDRep::on_boundary_space() const {
  const Eigen::MatrixXd left = space->dtrace() * green;
  return left * (space->dmass() * space->dtrace()).transpose();
}

Eigen::VectorXd NtDRep::apply(const Eigen::VectorXd& g) const {
  return space->dtrace() * (green * (space->dtrace().transpose() * (space->dmass() * g)));
}

double NtDRep::symmetry_defect() const {
  const double scale = green.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  return (green - green.transpose()).cwiseAbs().maxCoeff() / scale;
}

NtDRep ntd_assemble(const NeumannSolver& solver, int level) {
  const FeSpace& space = solver.space();
  const int nb = space.num_boundary_nodes();
  Eigen::MatrixXd loads = Eigen::MatrixXd::Zero(space.num_nodes(), nb);
  for (int b = 0; b < nb; ++b) loads(space.boundary_nodes()[static_cast<size_t>(b)], b) = 1.0;
  const Eigen::MatrixXd v = solver.solve_loads(loads);
  NtDRep rep;
  rep.space = &space;
  rep.level = level;
  rep.green.resize(nb, nb);
  for (int a = 0; a < nb; ++a) rep.green.row(a) = v.row(space.boundary_nodes()[static_cast<size_t>(a)]);
  return rep;
}

NtDRep ntd_assemble(const FeSpace& space, const NodalField& A) {
  A.validate(1e-9);
  const NeumannSolver solver(space, A);
  return ntd_assemble(solver, space.mesh().level());
}

SpMat boundary_prolongation(const FeSpace& coarse, const FeSpace& fine) {
  const int nc = coarse.num_boundary_edges();
  const int nf = fine.num_boundary_edges();
  if (nf % nc != 0) throw ValidationError("boundary triangulations are not nested");
  const int f = nf / nc;
  if ((f & (f - 1)) != 0) throw ValidationError("boundary triangulations are not related by uniform refinement");
  const auto& ce = coarse.mesh().boundary_edges();
  const auto& fe = fine.mesh().boundary_edges();
  const double tol = 1e-9 * std::max(1.0, coarse.mesh().boundary_length());
  std::vector<Triplet> trips;
  trips.reserve(static_cast<size_t>(nf) * 4);
  for (int e = 0; e < nc; ++e) {
    const Point& a = coarse.mesh().vertex(ce[static_cast<size_t>(e)].v0);
    const Point& b = coarse.mesh().vertex(ce[static_cast<size_t>(e)].v1);
    for (int j = 0; j < f; ++j) {
      const int k = e * f + j;
      const double s0 = static_cast<double>(j) / f, s1 = static_cast<double>(j + 1) / f;
      const Point& p0 = fine.mesh().vertex(fe[static_cast<size_t>(k)].v0);
      const Point& p1 = fine.mesh().vertex(fe[static_cast<size_t>(k)].v1);
      if ((p0 - (a + s0 * (b - a))).norm() > tol || (p1 - (a + s1 * (b - a))).norm() > tol) {
        throw ValidationError("fine boundary is not a refinement of the coarse boundary");
      }
      trips.emplace_back(2 * k, 2 * e, 1.0 - s0);
      trips.emplace_back(2 * k, 2 * e + 1, s0);
      trips.emplace_back(2 * k + 1, 2 * e, 1.0 - s1);
      trips.emplace_back(2 * k + 1, 2 * e + 1, s1);
    }
  }
  SpMat P(fine.boundary_dim(), coarse.boundary_dim());
  P.setFromTriplets(trips.begin(), trips.end());
  P.prune(0.0);
  return P;
}

Eigen::MatrixXd transfer(const NtDRep& coarse, const FeSpace& fine) {
  const SpMat P = boundary_prolongation(*coarse.space, fine);
  // Pr N_c Pi_c = Pr tr G tr^T M_c M_c^{-1} Pr^T M_f = Pr tr G tr^T Pr^T M_f.
  const SpMat left = P * coarse.space->dtrace();
  const Eigen::MatrixXd lg = left * coarse.green;
  const SpMat right = SpMat(left.transpose()) * fine.dmass();
  return lg * right;
}

double l2l2_distance(const NtDRep& a, const NtDRep& b) {
  if (a.space == b.space || (a.space->mesh().level() == b.space->mesh().level() &&
                              a.green.rows() == b.green.rows() &&
                              a.space->num_nodes() == b.space->num_nodes())) {
    // Nonzero spectrum of the D operator equals that of Lb^T (Ga - Gb) Lb with Mb = Lb Lb^T.
    const Eigen::MatrixXd Mb = Eigen::MatrixXd(a.space->boundary_mass());
    const Eigen::MatrixXd L = Mb.llt().matrixL();
    const Eigen::MatrixXd d = a.green - b.green;
    Eigen::MatrixXd B = L.transpose() * d * L;
    B = 0.5 * (B + B.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(B, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
  }
  const NtDRep& coarse = a.green.rows() < b.green.rows() ? a : b;
  const NtDRep& fine = a.green.rows() < b.green.rows() ? b : a;
  const Eigen::MatrixXd T = transfer(coarse, *fine.space) - fine.on_boundary_space();
  return operator_norm(*fine.space, T);
}

double l2l2_norm(const NtDRep& a) {
  NtDRep zero = a;
  zero.green.setZero();
  return l2l2_distance(a, zero);
}

LogLogFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("log-log fit needs two or more points");
  const size_t n = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < n; ++i) {
    if (!(x[i] > 0.0 && y[i] > 0.0)) throw ValidationError("log-log fit needs positive data");
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double den = n * sxx - sx * sx;
  if (den == 0.0) throw ValidationError("log-log fit needs distinct abscissae");
  LogLogFit f;
  f.slope = (n * sxy - sx * sy) / den;
  f.intercept = (sy - f.slope * sx) / n;
  return f;
}

HolderReport holder_check(const FeSpace& space, const NodalField& a1, const NodalField& a2,
                          const std::vector<double>& t) {
  if (a1.kind != a2.kind || a1.num_nodes() != a2.num_nodes()) throw ValidationError("homotopy endpoints differ in shape");
  HolderReport r;
  const NtDRep n1 = ntd_assemble(space, a1);
  std::vector<double> xs, ys;
  double prev = 0.0;
  for (double ti : t) {
    NodalField at = a1;
    at.values = a1.values + ti * (a2.values - a1.values);
    at.lambda0 = std::min(a1.lambda0, a2.lambda0);
    at.lambda1 = std::max(a1.lambda1, a2.lambda1);
    const double l1 = l1_distance(space, at, a1);
    const double d = ti == 0.0 ? l2l2_distance(n1, n1) : l2l2_distance(ntd_assemble(space, at), n1);
    r.t.push_back(ti);
    r.l1.push_back(l1);
    r.ntd.push_back(d);
    if (d < prev) r.monotone = false;
    prev = d;
    if (ti > 0.0 && l1 > 0.0 && d > 0.0) {
      xs.push_back(l1);
      ys.push_back(d);
    }
  }
  if (xs.size() >= 2) r.slope = loglog_fit(xs, ys).slope;
  return r;
}

ConvergenceReport fem_convergence_check(const TriMesh& base, const std::function<double(const Point&)>& sigma,
                                        double lambda0, double lambda1, const std::vector<int>& levels) {
  if (levels.size() < 3) throw ValidationError("convergence check needs at least three levels");
  for (size_t i = 1; i < levels.size(); ++i) {
    if (levels[i] <= levels[i - 1]) throw ValidationError("levels must be strictly increasing");
  }
  ConvergenceReport r;
  r.levels = levels;
  r.reference_level = levels.back() + 2;
  const FeSpace ref_space(refine(base, r.reference_level));
  const NodalField ref_field = NodalField::scalar_from(interpolate(ref_space, sigma), lambda0, lambda1);
  const NtDRep ref = ntd_assemble(ref_space, ref_field);
  const Eigen::MatrixXd ref_op = ref.on_boundary_space();
  for (int level : levels) {
    const FeSpace space(refine(base, level));
    const NodalField field = NodalField::scalar_from(interpolate(space, sigma), lambda0, lambda1);
    const NtDRep n = ntd_assemble(space, field);
    r.h.push_back(mesh_quality(space.mesh()).h);
    r.error.push_back(operator_norm(ref_space, transfer(n, ref_space) - ref_op));
  }
  for (size_t i = 1; i < r.error.size(); ++i) {
    if (!(r.error[i] < r.error[i - 1])) r.monotone = false;
  }
  r.slope = loglog_fit(r.h, r.error).slope;
  return r;
}

}  // namespace eit
