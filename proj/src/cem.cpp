#include "eit/cem.hpp"

#include "eit/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <set>
#include <string_view>

namespace eit {

using Triplet = Eigen::Triplet<double>;

// ---------------------------------------------------------------------------
// Layouts

void ElectrodeLayout::validate(const TriMesh& mesh) const {
  const int M = size();
  if (M < 2) throw ValidationError("a layout needs at least two electrodes");
  if (static_cast<int>(extended.size()) != M || static_cast<int>(impedance.size()) != M) {
    throw ValidationError("layout arrays have inconsistent lengths");
  }
  if (!(z_min > 0.0 && z_max >= z_min)) throw ValidationError("impedance window must satisfy 0 < Z1 <= Z2");
  const int ne = mesh.num_boundary_edges();
  std::vector<int> owner(static_cast<size_t>(ne), -1);
  std::vector<char> used(static_cast<size_t>(ne), 0);
  for (int m = 0; m < M; ++m) {
    if (!(impedance[static_cast<size_t>(m)] >= z_min && impedance[static_cast<size_t>(m)] <= z_max)) {
      throw ValidationError("electrode " + std::to_string(m) + " impedance outside [Z1, Z2]");
    }
    if (electrodes[static_cast<size_t>(m)].empty()) throw ValidationError("electrode " + std::to_string(m) + " is empty");
    for (int e : extended[static_cast<size_t>(m)]) {
      if (e < 0 || e >= ne) throw ValidationError("extended electrode edge index out of range");
      if (owner[static_cast<size_t>(e)] >= 0) throw ValidationError("extended electrodes overlap");
      owner[static_cast<size_t>(e)] = m;
    }
    for (int e : electrodes[static_cast<size_t>(m)]) {
      if (e < 0 || e >= ne) throw ValidationError("electrode edge index out of range");
      if (used[static_cast<size_t>(e)]) throw ValidationError("electrodes overlap");
      used[static_cast<size_t>(e)] = 1;
      if (owner[static_cast<size_t>(e)] != m) {
        throw ValidationError("electrode " + std::to_string(m) + " is not contained in its extended electrode");
      }
    }
  }
  for (int e = 0; e < ne; ++e) {
    if (owner[static_cast<size_t>(e)] < 0) throw ValidationError("extended electrodes do not cover the boundary");
  }
}

ElectrodeLayout ElectrodeLayout::refined(int levels) const {
  if (levels < 0) throw ValidationError("cannot coarsen a layout");
  ElectrodeLayout out = *this;
  out.mesh_level = mesh_level + levels;
  const int f = 1 << levels;
  auto expand = [f](const std::vector<int>& edges) {
    std::vector<int> r;
    r.reserve(edges.size() * static_cast<size_t>(f));
    for (int e : edges) {
      for (int j = 0; j < f; ++j) r.push_back(e * f + j);
    }
    return r;
  };
  for (auto& e : out.electrodes) e = expand(e);
  for (auto& e : out.extended) e = expand(e);
  return out;
}

bool LayoutStats::count_bound_holds() const {
  return M <= eta * theta * mu * perimeter / delta * (1.0 + 1e-12);
}

ElectrodeLayout layout_from_mesh(const TriMesh& mesh, int m, int k, double z, double z_min, double z_max) {
  if (m < 0) throw ValidationError("coarsening level m must be nonnegative");
  if (m > 20 || k < 1 || k > (1 << m)) throw ValidationError("active sub-edge count k must satisfy 1 <= k <= 2^m");
  if (mesh.level() < m) {
    throw ValidationError("mesh level " + std::to_string(mesh.level()) + " is below the coarsening level " +
                          std::to_string(m));
  }
  const int f = 1 << m;
  const int ne = mesh.num_boundary_edges();
  if (ne % f != 0) throw ValidationError("boundary edge count is not divisible by 2^m");
  ElectrodeLayout layout;
  layout.z_min = z_min;
  layout.z_max = z_max;
  layout.mesh_level = mesh.level();
  for (int p = 0; p < ne / f; ++p) {
    std::vector<int> ext, el;
    for (int j = 0; j < f; ++j) ext.push_back(p * f + j);
    for (int j = 0; j < k; ++j) el.push_back(p * f + j);
    layout.extended.push_back(std::move(ext));
    layout.electrodes.push_back(std::move(el));
    layout.impedance.push_back(z);
  }
  layout.validate(mesh);
  return layout;
}

namespace {

double edges_measure(const TriMesh& mesh, const std::vector<int>& edges) {
  double s = 0.0;
  for (int e : edges) s += mesh.boundary_edges()[static_cast<size_t>(e)].length;
  return s;
}

double edges_diameter(const TriMesh& mesh, const std::vector<int>& edges) {
  std::vector<Point> pts;
  for (int e : edges) {
    pts.push_back(mesh.vertex(mesh.boundary_edges()[static_cast<size_t>(e)].v0));
    pts.push_back(mesh.vertex(mesh.boundary_edges()[static_cast<size_t>(e)].v1));
  }
  double d = 0.0;
  for (size_t i = 0; i < pts.size(); ++i) {
    for (size_t j = i + 1; j < pts.size(); ++j) d = std::max(d, (pts[i] - pts[j]).norm());
  }
  return d;
}

}  // namespace

LayoutStats layout_stats(const TriMesh& mesh, const ElectrodeLayout& layout) {
  LayoutStats s;
  s.M = layout.size();
  s.perimeter = mesh.boundary_length();
  double mmin = std::numeric_limits<double>::infinity(), mmax = 0.0;
  for (int m = 0; m < s.M; ++m) {
    const auto& el = layout.electrodes[static_cast<size_t>(m)];
    const auto& ext = layout.extended[static_cast<size_t>(m)];
    const double le = edges_measure(mesh, el);
    const double lx = edges_measure(mesh, ext);
    mmin = std::min(mmin, le);
    mmax = std::max(mmax, le);
    s.delta = std::max(s.delta, edges_diameter(mesh, el));
    s.theta = std::max(s.theta, lx / le);
    s.eta = std::max(s.eta, edges_diameter(mesh, ext) / lx);
  }
  s.mu = mmax / mmin;
  return s;
}

void write_layout(std::ostream& os, const ElectrodeLayout& layout) {
  for (int m = 0; m < layout.size(); ++m) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, layout.impedance[static_cast<size_t>(m)]);
    os << m << " : " << std::string_view(buf, static_cast<size_t>(res.ptr - buf)) << " :";
    for (int e : layout.electrodes[static_cast<size_t>(m)]) os << ' ' << e;
    os << " :";
    for (int e : layout.extended[static_cast<size_t>(m)]) os << ' ' << e;
    os << '\n';
  }
}

// ---------------------------------------------------------------------------
// Operators

ElectrodeOperators::ElectrodeOperators(const FeSpace& space, const ElectrodeLayout& layout) : space_(&space) {
  const TriMesh& mesh = space.mesh();
  if (layout.mesh_level != mesh.level()) {
    throw ValidationError("layout refers to mesh level " + std::to_string(layout.mesh_level) + ", mesh is level " +
                          std::to_string(mesh.level()));
  }
  layout.validate(mesh);
  const int M = layout.size();
  const int nd = space.boundary_dim();
  measure_.resize(M);
  ext_measure_.resize(M);
  chi_ = Eigen::MatrixXd::Zero(nd, M);
  chi_ext_ = Eigen::MatrixXd::Zero(nd, M);
  node_loads_ = Eigen::MatrixXd::Zero(space.num_nodes(), M);
  for (int m = 0; m < M; ++m) {
    measure_[m] = edges_measure(mesh, layout.electrodes[static_cast<size_t>(m)]);
    ext_measure_[m] = edges_measure(mesh, layout.extended[static_cast<size_t>(m)]);
    for (int e : layout.electrodes[static_cast<size_t>(m)]) {
      chi_(2 * e, m) = chi_(2 * e + 1, m) = 1.0;
      const auto& be = mesh.boundary_edges()[static_cast<size_t>(e)];
      node_loads_(be.v0, m) += 0.5 * be.length;
      node_loads_(be.v1, m) += 0.5 * be.length;
    }
    for (int e : layout.extended[static_cast<size_t>(m)]) chi_ext_(2 * e, m) = chi_ext_(2 * e + 1, m) = 1.0;
  }
}

Eigen::VectorXd ElectrodeOperators::phi(const Eigen::VectorXd& I) const {
  if (I.size() != size()) throw ValidationError("current pattern has the wrong length");
  return chi_ * I.cwiseQuotient(measure_);
}

Eigen::VectorXd ElectrodeOperators::phi_inv(const Eigen::VectorXd& f) const {
  return chi_.transpose() * (space_->dmass() * f);
}

Eigen::MatrixXd ElectrodeOperators::phi_matrix() const { return chi_ * measure_.cwiseInverse().asDiagonal(); }

Eigen::MatrixXd ElectrodeOperators::phi_inv_matrix() const {
  return (space_->dmass() * chi_).transpose();
}

Eigen::MatrixXd ElectrodeOperators::p_e() const { return phi_matrix() * phi_inv_matrix(); }

Eigen::MatrixXd ElectrodeOperators::p_star() const {
  const int nd = space_->boundary_dim();
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(nd);
  const Eigen::RowVectorXd w = (space_->dmass() * one).transpose() / space_->mesh().boundary_length();
  return Eigen::MatrixXd::Identity(nd, nd) - one * w;
}

namespace {

// (I - |e| 1^T / sum|e|): electrode integrals -> integrals of the PC_* projection.
Eigen::MatrixXd centering(const Eigen::VectorXd& measure) {
  const int M = static_cast<int>(measure.size());
  return Eigen::MatrixXd::Identity(M, M) - measure * Eigen::RowVectorXd::Ones(M) / measure.sum();
}

}  // namespace

Eigen::MatrixXd ElectrodeOperators::p() const {
  return phi_matrix() * (centering(measure_) * phi_inv_matrix());
}

Eigen::MatrixXd ElectrodeOperators::q() const {
  return phi_matrix() * (space_->dmass() * chi_ext_).transpose();
}

Eigen::MatrixXd ElectrodeOperators::e_pe() const {
  return p_star() * (chi_ext_ * measure_.cwiseInverse().asDiagonal()) * phi_inv_matrix();
}

Eigen::MatrixXd ElectrodeOperators::e_p() const {
  return p_star() * (chi_ext_ * measure_.cwiseInverse().asDiagonal()) * (centering(measure_) * phi_inv_matrix());
}

Eigen::VectorXd ElectrodeOperators::extend(const Eigen::VectorXd& V) const {
  return space_->dcenter(chi_ext_ * V.cwiseQuotient(measure_));
}

Eigen::MatrixXd ElectrodeOperators::e_r_q(const Eigen::MatrixXd& R) const {
  if (R.rows() != size() || R.cols() != size()) throw ValidationError("matrix size does not match the layout");
  const Eigen::MatrixXd left = p_star() * (chi_ext_ * measure_.cwiseInverse().asDiagonal());
  return left * (R * (space_->dmass() * chi_ext_).transpose());
}

Eigen::MatrixXd ElectrodeOperators::lift(const Eigen::MatrixXd& R) const {
  if (R.rows() != size() || R.cols() != size()) throw ValidationError("matrix size does not match the layout");
  return phi_matrix() * (R * (centering(measure_) * phi_inv_matrix()));
}

namespace {

double largest_singular_value(const Eigen::MatrixXd& B) {
  if (B.size() == 0) return 0.0;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(B);
  return svd.singularValues()(0);
}

}  // namespace

double pc_operator_norm(const Eigen::MatrixXd& R, const Eigen::VectorXd& measure) {
  const int M = static_cast<int>(measure.size());
  if (R.rows() != M || R.cols() != M) throw ValidationError("matrix size does not match the layout");
  Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(M, M - 1);
  for (int j = 0; j < M - 1; ++j) {
    Z(j, j) = 1.0;
    Z(M - 1, j) = -1.0;
  }
  const Eigen::VectorXd w = measure.cwiseInverse();
  const Eigen::MatrixXd G = Z.transpose() * w.asDiagonal() * Z;
  const Eigen::MatrixXd L = G.llt().matrixL();
  // B = W^{1/2} R Z L^{-T}
  const Eigen::MatrixXd RZ = w.cwiseSqrt().asDiagonal() * (R * Z);
  const Eigen::MatrixXd B = L.triangularView<Eigen::Lower>().solve(RZ.transpose()).transpose();
  return largest_singular_value(B);
}

double pc_full_operator_norm(const Eigen::MatrixXd& R, const Eigen::VectorXd& measure) {
  const Eigen::VectorXd w = measure.cwiseInverse();
  return largest_singular_value(w.cwiseSqrt().asDiagonal() * R * w.cwiseSqrt().cwiseInverse().asDiagonal());
}

double spectral_norm(const Eigen::MatrixXd& R) { return largest_singular_value(R); }

// ---------------------------------------------------------------------------
// CEM

CemSolver::CemSolver(const FeSpace& space, const NodalField& A, const ElectrodeLayout& layout)
    : space_(&space), layout_(layout), ops_(space, layout) {
  A.validate(1e-9);
  const TriMesh& mesh = space.mesh();
  const int n = space.num_nodes();
  const int M = layout.size();
  const SpMat K = assemble_stiffness(space, A);
  std::vector<Triplet> trips;
  trips.reserve(static_cast<size_t>(K.nonZeros()) + 8 * static_cast<size_t>(mesh.num_boundary_edges()));
  for (int k = 0; k < K.outerSize(); ++k) {
    for (SpMat::InnerIterator it(K, k); it; ++it) trips.emplace_back(it.row(), it.col(), it.value());
  }
  for (int m = 0; m < M; ++m) {
    const double z = layout.impedance[static_cast<size_t>(m)];
    for (int e : layout.electrodes[static_cast<size_t>(m)]) {
      const auto& be = mesh.boundary_edges()[static_cast<size_t>(e)];
      const double d = be.length / (3.0 * z), o = be.length / (6.0 * z);
      trips.emplace_back(be.v0, be.v0, d);
      trips.emplace_back(be.v1, be.v1, d);
      trips.emplace_back(be.v0, be.v1, o);
      trips.emplace_back(be.v1, be.v0, o);
      trips.emplace_back(be.v0, n + m, -0.5 * be.length / z);
      trips.emplace_back(n + m, be.v0, -0.5 * be.length / z);
      trips.emplace_back(be.v1, n + m, -0.5 * be.length / z);
      trips.emplace_back(n + m, be.v1, -0.5 * be.length / z);
    }
    trips.emplace_back(n + m, n + m, ops_.measure()[m] / z);
    trips.emplace_back(n + m, n + M, ops_.measure()[m]);
    trips.emplace_back(n + M, n + m, ops_.measure()[m]);
  }
  system_.resize(n + M + 1, n + M + 1);
  system_.setFromTriplets(trips.begin(), trips.end());
  system_.makeCompressed();
  lu_ = std::make_shared<Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>>>();
  lu_->compute(system_);
  if (lu_->info() != Eigen::Success) throw NumericalError("CEM system factorization failed (degenerate layout?)");
}

CemSolution CemSolver::solve(const Eigen::VectorXd& I) const {
  const int n = space_->num_nodes();
  const int M = layout_.size();
  if (I.size() != M) throw ValidationError("current pattern has the wrong length");
  if (std::abs(I.sum()) > 1e-10 * std::max(1.0, I.cwiseAbs().sum())) {
    throw ValidationError("current pattern must sum to zero");
  }
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + M + 1);
  rhs.segment(n, M) = I;
  double zi = 0.0;
  for (int m = 0; m < M; ++m) zi += layout_.impedance[static_cast<size_t>(m)] * I[m];
  rhs[n + M] = zi;
  const Eigen::VectorXd x = lu_->solve(rhs);
  if (lu_->info() != Eigen::Success || !x.allFinite()) throw NumericalError("CEM solve failed");
  CemSolution s;
  s.u = x.head(n);
  s.U = x.segment(n, M);
  const double rn = rhs.norm();
  s.residual = (system_ * x - rhs).norm() / (rn > 0.0 ? rn : 1.0);
  return s;
}

Eigen::VectorXd CemSolver::currents(const CemSolution& s) const {
  const Eigen::VectorXd integrals = ops_.node_loads().transpose() * s.u;
  Eigen::VectorXd I(layout_.size());
  for (int m = 0; m < layout_.size(); ++m) {
    I[m] = (ops_.measure()[m] * s.U[m] - integrals[m]) / layout_.impedance[static_cast<size_t>(m)];
  }
  return I;
}

Eigen::VectorXd CemSolver::voltages(const CemSolution& s) const {
  const Eigen::VectorXd integrals = ops_.node_loads().transpose() * s.u;
  const double c = -integrals.sum() / ops_.measure().sum();
  return integrals + c * ops_.measure();
}

double CemSolver::energy(const CemSolution& s) const {
  const int n = space_->num_nodes();
  const int M = layout_.size();
  Eigen::VectorXd x(n + M + 1);
  x << s.u, s.U, 0.0;
  return x.dot(system_ * x);
}

CemSolution solve_cem(const FeSpace& space, const NodalField& A, const Eigen::VectorXd& I,
                      const ElectrodeLayout& layout) {
  return CemSolver(space, A, layout).solve(I);
}

Eigen::MatrixXd complete_resistance(const Eigen::MatrixXd& responses) {
  const Eigen::Index M = responses.rows();
  if (responses.cols() != M - 1) throw ValidationError("expected M-1 responses");
  Eigen::MatrixXd R(M, M);
  const Eigen::VectorXd last = -responses.rowwise().sum() / static_cast<double>(M);
  for (Eigen::Index j = 0; j < M - 1; ++j) R.col(j) = responses.col(j) + last;
  R.col(M - 1) = last;
  return R;
}

Eigen::MatrixXd resistance_matrix(const FeSpace& space, const NodalField& A, const ElectrodeLayout& layout) {
  const CemSolver solver(space, A, layout);
  const int M = layout.size();
  Eigen::MatrixXd W(M, M - 1);
  for (int j = 0; j < M - 1; ++j) {
    Eigen::VectorXd I = Eigen::VectorXd::Zero(M);
    I[j] = 1.0;
    I[M - 1] = -1.0;
    W.col(j) = solver.voltages(solver.solve(I));
  }
  return complete_resistance(W);
}

Eigen::MatrixXd simplified_resistance_matrix(const NeumannSolver& solver, const ElectrodeOperators& ops) {
  const int M = ops.size();
  Eigen::MatrixXd loads(ops.node_loads().rows(), M - 1);
  const Eigen::VectorXd last = ops.node_loads().col(M - 1) / ops.measure()[M - 1];
  for (int j = 0; j < M - 1; ++j) loads.col(j) = ops.node_loads().col(j) / ops.measure()[j] - last;
  const Eigen::MatrixXd v = solver.solve_loads(loads);
  const Eigen::MatrixXd Y = ops.node_loads().transpose() * v;
  const Eigen::MatrixXd centred = Y - ops.measure() * (Y.colwise().sum() / ops.measure().sum());
  return complete_resistance(centred);
}

Eigen::MatrixXd simplified_resistance_matrix(const FeSpace& space, const NodalField& A,
                                             const ElectrodeLayout& layout) {
  A.validate(1e-9);
  const ElectrodeOperators ops(space, layout);
  const NeumannSolver solver(space, A);
  return simplified_resistance_matrix(solver, ops);
}

}  // namespace eit
