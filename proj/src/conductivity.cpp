#include "eit/conductivity.hpp"

#include "eit/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace eit {

// ---------------------------------------------------------------------------
// NodalField

NodalField NodalField::constant(int num_nodes, double value, double lambda0, double lambda1) {
  NodalField f;
  f.kind = FieldKind::scalar;
  f.values = Eigen::MatrixXd::Constant(num_nodes, 1, value);
  f.lambda0 = lambda0;
  f.lambda1 = lambda1;
  return f;
}

NodalField NodalField::constant_tensor(int num_nodes, const Eigen::Matrix2d& a, double lambda0, double lambda1) {
  NodalField f;
  f.kind = FieldKind::tensor;
  f.values.resize(num_nodes, 3);
  f.values.col(0).setConstant(a(0, 0));
  f.values.col(1).setConstant(0.5 * (a(0, 1) + a(1, 0)));
  f.values.col(2).setConstant(a(1, 1));
  f.lambda0 = lambda0;
  f.lambda1 = lambda1;
  return f;
}

NodalField NodalField::scalar_from(const Eigen::VectorXd& v, double lambda0, double lambda1) {
  NodalField f;
  f.kind = FieldKind::scalar;
  f.values = v;
  f.lambda0 = lambda0;
  f.lambda1 = lambda1;
  return f;
}

Eigen::Matrix2d NodalField::at(int i) const {
  if (kind == FieldKind::scalar) return values(i, 0) * Eigen::Matrix2d::Identity();
  Eigen::Matrix2d a;
  a << values(i, 0), values(i, 1), values(i, 1), values(i, 2);
  return a;
}

Eigen::Matrix2d NodalField::mean_over(int i, int j, int k) const {
  if (kind == FieldKind::scalar) {
    return ((values(i, 0) + values(j, 0) + values(k, 0)) / 3.0) * Eigen::Matrix2d::Identity();
  }
  return (at(i) + at(j) + at(k)) / 3.0;
}

NodalField NodalField::scaled(double c) const {
  if (!(c > 0.0)) throw ValidationError("conductivity scale factor must be positive");
  NodalField f = *this;
  f.values *= c;
  f.lambda0 *= c;
  f.lambda1 *= c;
  return f;
}

Eigen::VectorXd NodalField::flat() const {
  Eigen::MatrixXd t = values.transpose();
  return Eigen::Map<const Eigen::VectorXd>(t.data(), t.size());
}

void NodalField::set_flat(const Eigen::VectorXd& x) {
  if (x.size() != values.size()) throw ValidationError("flattened field has the wrong size");
  const int c = components();
  for (int i = 0; i < num_nodes(); ++i) {
    for (int k = 0; k < c; ++k) values(i, k) = x[i * c + k];
  }
}

namespace {

Eigen::Vector2d sym_eigenvalues(double a11, double a12, double a22) {
  const double m = 0.5 * (a11 + a22);
  const double r = std::hypot(0.5 * (a11 - a22), a12);
  return {m - r, m + r};
}

}  // namespace

bool NodalField::admissible(double tol) const {
  for (int i = 0; i < num_nodes(); ++i) {
    double lo, hi;
    if (kind == FieldKind::scalar) {
      lo = hi = values(i, 0);
    } else {
      const auto ev = sym_eigenvalues(values(i, 0), values(i, 1), values(i, 2));
      lo = ev[0];
      hi = ev[1];
    }
    if (!(lo >= lambda0 - tol && hi <= lambda1 + tol)) return false;
  }
  return true;
}

void NodalField::validate(double tol) const {
  if (values.cols() != components()) throw ValidationError("conductivity has the wrong number of components");
  if (!(lambda0 > 0.0 && lambda1 >= lambda0)) throw ValidationError("conductivity bounds must satisfy 0 < lambda0 <= lambda1");
  if (!values.allFinite()) throw ValidationError("conductivity has non-finite values");
  if (!admissible(tol)) throw ValidationError("conductivity violates its ellipticity bounds");
}

// ---------------------------------------------------------------------------
// Phantom

double Phantom::value(const Point& p) const {
  double v = background;
  for (const auto& d : disks) {
    if ((p - d.center).squaredNorm() < d.radius * d.radius) v = d.value;
  }
  for (const auto& poly : polygons) {
    if (poly.shape.contains(p)) v = poly.value;
  }
  return v;
}

double Phantom::exact_tv() const {
  double tv = 0.0;
  for (const auto& d : disks) tv += std::abs(d.value - background) * 2.0 * std::numbers::pi * d.radius;
  for (const auto& poly : polygons) tv += std::abs(poly.value - background) * poly.shape.perimeter();
  return tv;
}

double Phantom::min_value() const {
  double v = background;
  for (const auto& d : disks) v = std::min(v, d.value);
  for (const auto& poly : polygons) v = std::min(v, poly.value);
  return v;
}

double Phantom::max_value() const {
  double v = background;
  for (const auto& d : disks) v = std::max(v, d.value);
  for (const auto& poly : polygons) v = std::max(v, poly.value);
  return v;
}

void Phantom::validate() const {
  if (!(lambda0 > 0.0 && lambda1 >= lambda0)) throw ValidationError("phantom bounds must satisfy 0 < lambda0 <= lambda1");
  if (min_value() < lambda0 || max_value() > lambda1) throw ValidationError("phantom values leave [lambda0, lambda1]");
  for (const auto& d : disks) {
    if (!(d.radius > 0.0)) throw ValidationError("disk inclusion radius must be positive");
  }
  for (const auto& poly : polygons) poly.shape.validate();
}

NodalField Phantom::interpolate_on(const FeSpace& space) const {
  return NodalField::scalar_from(interpolate(space, [this](const Point& p) { return value(p); }), lambda0, lambda1);
}

// ---------------------------------------------------------------------------
// Point location

PointLocator::PointLocator(const TriMesh& mesh) : mesh_(&mesh) {
  Eigen::Vector2d lo = Eigen::Vector2d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector2d hi = -lo;
  for (const auto& v : mesh.vertices()) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  const int side = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(mesh.num_triangles()))));
  nx_ = ny_ = side;
  const Eigen::Vector2d span = (hi - lo).cwiseMax(1e-12);
  lo_ = lo - 1e-9 * span;
  cell_ = (span * (1.0 + 2e-9)) / side;
  buckets_.assign(static_cast<size_t>(nx_ * ny_), {});
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangle(t);
    Eigen::Vector2d a = mesh.vertex(tri[0]), b = a;
    for (int k = 1; k < 3; ++k) {
      a = a.cwiseMin(mesh.vertex(tri[k]));
      b = b.cwiseMax(mesh.vertex(tri[k]));
    }
    const int i0 = std::clamp(static_cast<int>((a.x() - lo_.x()) / cell_.x()), 0, nx_ - 1);
    const int i1 = std::clamp(static_cast<int>((b.x() - lo_.x()) / cell_.x()), 0, nx_ - 1);
    const int j0 = std::clamp(static_cast<int>((a.y() - lo_.y()) / cell_.y()), 0, ny_ - 1);
    const int j1 = std::clamp(static_cast<int>((b.y() - lo_.y()) / cell_.y()), 0, ny_ - 1);
    for (int j = j0; j <= j1; ++j) {
      for (int i = i0; i <= i1; ++i) buckets_[static_cast<size_t>(j * nx_ + i)].push_back(t);
    }
  }
}

std::optional<PointLocator::Hit> PointLocator::locate(const Point& p, double tol) const {
  const int ic = static_cast<int>(std::floor((p.x() - lo_.x()) / cell_.x()));
  const int jc = static_cast<int>(std::floor((p.y() - lo_.y()) / cell_.y()));
  auto bary = [this](int t, const Point& q) {
    const auto& tri = mesh_->triangle(t);
    const Point& a = mesh_->vertex(tri[0]);
    const Point& b = mesh_->vertex(tri[1]);
    const Point& c = mesh_->vertex(tri[2]);
    const double det = (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
    const double l1 = ((q - a).x() * (c - a).y() - (q - a).y() * (c - a).x()) / det;
    const double l2 = ((b - a).x() * (q - a).y() - (b - a).y() * (q - a).x()) / det;
    return Eigen::Vector3d(1.0 - l1 - l2, l1, l2);
  };
  Hit best;
  double best_min = -std::numeric_limits<double>::infinity();
  for (int ring = 0; ring <= 1; ++ring) {
    for (int j = jc - ring; j <= jc + ring; ++j) {
      for (int i = ic - ring; i <= ic + ring; ++i) {
        if (i < 0 || j < 0 || i >= nx_ || j >= ny_) continue;
        if (ring == 1 && i != ic - 1 && i != ic + 1 && j != jc - 1 && j != jc + 1) continue;
        for (int t : buckets_[static_cast<size_t>(j * nx_ + i)]) {
          const Eigen::Vector3d l = bary(t, p);
          const double mn = l.minCoeff();
          if (mn >= -tol) return Hit{t, l};
          if (mn > best_min) {
            best_min = mn;
            best = Hit{t, l};
          }
        }
      }
    }
  }
  if (best.triangle < 0) return std::nullopt;
  best.bary = best.bary.cwiseMax(0.0);
  best.bary /= best.bary.sum();
  return best;
}

Eigen::VectorXd evaluate(const TriMesh& mesh, const PointLocator& locator, const NodalField& field, const Point& p) {
  const auto hit = locator.locate(p);
  if (!hit) throw ValidationError("point lies outside the mesh");
  const auto& tri = mesh.triangle(hit->triangle);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(field.components());
  for (int k = 0; k < 3; ++k) v += hit->bary[k] * field.values.row(tri[k]).transpose();
  return v;
}

// ---------------------------------------------------------------------------
// Raster

Eigen::VectorXd RasterField::sample(const Point& p) const {
  const double fx = std::clamp((p.x() - origin.x()) / cell, 0.0, static_cast<double>(nx - 1));
  const double fy = std::clamp((p.y() - origin.y()) / cell, 0.0, static_cast<double>(ny - 1));
  const int i0 = std::min(static_cast<int>(fx), std::max(nx - 2, 0));
  const int j0 = std::min(static_cast<int>(fy), std::max(ny - 2, 0));
  const int i1 = std::min(i0 + 1, nx - 1);
  const int j1 = std::min(j0 + 1, ny - 1);
  const double tx = fx - i0, ty = fy - j0;
  auto v = [this](int i, int j) { return values.row(j * nx + i).transpose(); };
  return (1 - tx) * (1 - ty) * v(i0, j0) + tx * (1 - ty) * v(i1, j0) + (1 - tx) * ty * v(i0, j1) + tx * ty * v(i1, j1);
}

double RasterField::min_value() const {
  if (components == 1) return values.col(0).minCoeff();
  double m = std::numeric_limits<double>::infinity();
  for (Eigen::Index r = 0; r < values.rows(); ++r) m = std::min(m, sym_eigenvalues(values(r, 0), values(r, 1), values(r, 2))[0]);
  return m;
}

double RasterField::max_value() const {
  if (components == 1) return values.col(0).maxCoeff();
  double m = -std::numeric_limits<double>::infinity();
  for (Eigen::Index r = 0; r < values.rows(); ++r) m = std::max(m, sym_eigenvalues(values(r, 0), values(r, 1), values(r, 2))[1]);
  return m;
}

FieldSource source_from(const Phantom& phantom) {
  FieldSource s;
  s.components = 1;
  s.lambda0 = phantom.lambda0;
  s.lambda1 = phantom.lambda1;
  s.eval = [phantom](const Point& p) { return Eigen::VectorXd::Constant(1, phantom.value(p)); };
  return s;
}

FieldSource source_from(const TriMesh& mesh, const PointLocator& locator, const NodalField& field) {
  FieldSource s;
  s.components = field.components();
  s.lambda0 = field.lambda0;
  s.lambda1 = field.lambda1;
  s.eval = [&mesh, &locator, &field](const Point& p) { return evaluate(mesh, locator, field, p); };
  return s;
}

RasterField mollify(const FieldSource& source, const Polygon& domain, double gamma, double cell) {
  if (!(gamma > 0.0)) throw ValidationError("mollification radius must be positive");
  if (cell <= 0.0) cell = gamma / 8.0;
  if (cell > gamma / 4.0) throw ValidationError("raster cell coarser than gamma/4 undersamples the kernel");
  const int comps = source.components;

  Eigen::Vector2d lo = Eigen::Vector2d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector2d hi = -lo;
  for (const auto& v : domain.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  RasterField out;
  out.cell = cell;
  out.components = comps;
  out.lambda0 = source.lambda0;
  out.lambda1 = source.lambda1;
  out.origin = lo - Eigen::Vector2d::Constant(gamma - 0.5 * cell);
  out.nx = static_cast<int>(std::ceil((hi.x() - lo.x() + 2.0 * gamma) / cell));
  out.ny = static_cast<int>(std::ceil((hi.y() - lo.y() + 2.0 * gamma) / cell));

  const int r = static_cast<int>(std::ceil(gamma / cell));
  const int inx = out.nx + 2 * r, iny = out.ny + 2 * r;
  const Eigen::Vector2d in_origin = out.origin - Eigen::Vector2d::Constant(r * cell);

  Eigen::VectorXd mid(comps);
  if (comps == 1) {
    mid[0] = 0.5 * (source.lambda0 + source.lambda1);
  } else {
    mid << 0.5 * (source.lambda0 + source.lambda1), 0.0, 0.5 * (source.lambda0 + source.lambda1);
  }
  Eigen::MatrixXd in(static_cast<Eigen::Index>(inx) * iny, comps);
  for (int j = 0; j < iny; ++j) {
    for (int i = 0; i < inx; ++i) {
      const Point p = in_origin + cell * Eigen::Vector2d(i, j);
      Eigen::VectorXd v;
      if (domain.contains(p)) {
        v = source.eval(p);
      } else {
        const Point q = domain.closest_boundary_point(p);
        const double d = (p - q).norm();
        if (d >= 2.0 * gamma) {
          v = mid;
        } else {
          v = source.eval(q);
          if (d > gamma) {
            const double t = (d - gamma) / gamma;
            const double s = t * t * (3.0 - 2.0 * t);
            v = (1.0 - s) * v + s * mid;
          }
        }
      }
      in.row(static_cast<Eigen::Index>(j) * inx + i) = v.transpose();
    }
  }

  std::vector<std::pair<int, double>> kernel;  // (input offset, weight)
  double total = 0.0;
  for (int dj = -r; dj <= r; ++dj) {
    for (int di = -r; di <= r; ++di) {
      const double rho2 = (di * di + dj * dj) * cell * cell / (gamma * gamma);
      if (rho2 >= 1.0) continue;
      const double w = std::exp(-1.0 / (1.0 - rho2));
      kernel.emplace_back(dj * inx + di, w);
      total += w;
    }
  }
  for (auto& k : kernel) k.second /= total;

  out.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(out.nx) * out.ny, comps);
  for (int j = 0; j < out.ny; ++j) {
    for (int i = 0; i < out.nx; ++i) {
      const int centre = (j + r) * inx + (i + r);
      for (int c = 0; c < comps; ++c) {
        double acc = 0.0;
        for (const auto& [off, w] : kernel) acc += w * in(centre + off, c);
        out.values(static_cast<Eigen::Index>(j) * out.nx + i, c) = acc;
      }
    }
  }
  return out;
}

RasterField mollify(const TriMesh& mesh, const NodalField& field, const Polygon& domain, double gamma, double cell) {
  field.validate(1e-9);
  const PointLocator locator(mesh);
  return mollify(source_from(mesh, locator, field), domain, gamma, cell);
}

NodalField discretize_bv(const FieldSource& source, const Polygon& domain, const FeSpace& target, double alpha) {
  if (!(alpha > 0.0 && alpha < 0.5)) throw ValidationError("discretization exponent alpha must lie in (0, 1/2)");
  const double h = mesh_quality(target.mesh()).h;
  const double gamma = std::pow(h, alpha);
  const RasterField raster = mollify(source, domain, gamma);
  NodalField out;
  out.kind = source.components == 1 ? FieldKind::scalar : FieldKind::tensor;
  out.lambda0 = source.lambda0;
  out.lambda1 = source.lambda1;
  out.values.resize(target.num_nodes(), source.components);
  for (int v = 0; v < target.num_nodes(); ++v) out.values.row(v) = raster.sample(target.mesh().vertex(v)).transpose();
  return project_to_admissible(out);
}

// ---------------------------------------------------------------------------
// TV, projection, distances

double tv_seminorm(const FeSpace& space, const NodalField& field) {
  if (field.num_nodes() != space.num_nodes()) throw ValidationError("field does not match the mesh");
  const TriMesh& m = space.mesh();
  const int comps = field.components();
  Eigen::Vector3d tv = Eigen::Vector3d::Zero();
  for (int t = 0; t < m.num_triangles(); ++t) {
    const auto& tri = m.triangle(t);
    const auto& g = space.gradients(t);
    for (int c = 0; c < comps; ++c) {
      const Eigen::Vector2d grad =
          g.col(0) * field.values(tri[0], c) + g.col(1) * field.values(tri[1], c) + g.col(2) * field.values(tri[2], c);
      tv[c] += space.area(t) * grad.norm();
    }
  }
  if (field.is_scalar()) return tv[0];
  return sym_eigenvalues(tv[0], tv[1], tv[2])[1];
}

NodalField project_to_admissible(const NodalField& field) {
  NodalField out = field;
  if (field.is_scalar()) {
    out.values = field.values.cwiseMax(field.lambda0).cwiseMin(field.lambda1);
    return out;
  }
  for (int i = 0; i < field.num_nodes(); ++i) {
    const auto ev = sym_eigenvalues(field.values(i, 0), field.values(i, 1), field.values(i, 2));
    if (ev[0] >= field.lambda0 && ev[1] <= field.lambda1) continue;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(field.at(i));
    const Eigen::Vector2d lam = es.eigenvalues().cwiseMax(field.lambda0).cwiseMin(field.lambda1);
    const Eigen::Matrix2d a = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
    out.values(i, 0) = a(0, 0);
    out.values(i, 1) = 0.5 * (a(0, 1) + a(1, 0));
    out.values(i, 2) = a(1, 1);
  }
  return out;
}

namespace {

// int_K f^+ for f linear with nodal values v on a triangle of the given area.
double positive_part_integral(Eigen::Vector3d v, double area) {
  std::sort(v.data(), v.data() + 3, std::greater<>());
  const double a = v[0], b = v[1], c = v[2];
  if (a <= 0.0) return 0.0;
  if (c >= 0.0) return area * (a + b + c) / 3.0;
  if (b <= 0.0) return area * a * a * a / (3.0 * (a - b) * (a - c));
  return area * (a + b + c) / 3.0 + area * (-c) * (-c) * (-c) / (3.0 * (a - c) * (b - c));
}

// Barycentric centroids of the 4^levels similar pieces of a triangle.
std::vector<Eigen::Vector3d> subdivision_centroids(int levels) {
  std::vector<std::array<Eigen::Vector3d, 3>> tris{{Eigen::Vector3d(1, 0, 0), Eigen::Vector3d(0, 1, 0), Eigen::Vector3d(0, 0, 1)}};
  for (int l = 0; l < levels; ++l) {
    std::vector<std::array<Eigen::Vector3d, 3>> next;
    next.reserve(tris.size() * 4);
    for (const auto& t : tris) {
      const Eigen::Vector3d ab = 0.5 * (t[0] + t[1]), bc = 0.5 * (t[1] + t[2]), ca = 0.5 * (t[2] + t[0]);
      next.push_back({t[0], ab, ca});
      next.push_back({ab, t[1], bc});
      next.push_back({ca, bc, t[2]});
      next.push_back({ab, bc, ca});
    }
    tris = std::move(next);
  }
  std::vector<Eigen::Vector3d> out;
  out.reserve(tris.size());
  for (const auto& t : tris) out.push_back((t[0] + t[1] + t[2]) / 3.0);
  return out;
}

double pointwise_norm(const Eigen::VectorXd& d) {
  if (d.size() == 1) return std::abs(d[0]);
  return std::abs(0.5 * (d[0] + d[2])) + std::hypot(0.5 * (d[0] - d[2]), d[1]);
}

}  // namespace

double l1_distance(const FeSpace& space, const NodalField& a, const NodalField& b) {
  if (a.num_nodes() != space.num_nodes() || b.num_nodes() != space.num_nodes()) {
    throw ValidationError("fields do not match the mesh");
  }
  if (a.kind != b.kind) throw ValidationError("cannot compare scalar and tensor fields");
  const TriMesh& m = space.mesh();
  double sum = 0.0;
  if (a.is_scalar()) {
    for (int t = 0; t < m.num_triangles(); ++t) {
      const auto& tri = m.triangle(t);
      Eigen::Vector3d d;
      for (int k = 0; k < 3; ++k) d[k] = a.values(tri[k], 0) - b.values(tri[k], 0);
      sum += positive_part_integral(d, space.area(t)) + positive_part_integral(-d, space.area(t));
    }
    return sum;
  }
  const auto pts = subdivision_centroids(3);
  for (int t = 0; t < m.num_triangles(); ++t) {
    const auto& tri = m.triangle(t);
    double acc = 0.0;
    for (const auto& l : pts) {
      Eigen::VectorXd d = Eigen::VectorXd::Zero(3);
      for (int k = 0; k < 3; ++k) d += l[k] * (a.values.row(tri[k]) - b.values.row(tri[k])).transpose();
      acc += pointwise_norm(d);
    }
    sum += space.area(t) * acc / static_cast<double>(pts.size());
  }
  return sum;
}

double l1_distance(const FeSpace& space, const NodalField& a, const Phantom& phantom, int subdivisions) {
  if (a.num_nodes() != space.num_nodes()) throw ValidationError("field does not match the mesh");
  const TriMesh& m = space.mesh();
  const auto pts = subdivision_centroids(subdivisions);
  double sum = 0.0;
  for (int t = 0; t < m.num_triangles(); ++t) {
    const auto& tri = m.triangle(t);
    const Point& p0 = m.vertex(tri[0]);
    const Point& p1 = m.vertex(tri[1]);
    const Point& p2 = m.vertex(tri[2]);
    double acc = 0.0;
    for (const auto& l : pts) {
      const Point x = l[0] * p0 + l[1] * p1 + l[2] * p2;
      if (a.is_scalar()) {
        const double v = l[0] * a.values(tri[0], 0) + l[1] * a.values(tri[1], 0) + l[2] * a.values(tri[2], 0);
        acc += std::abs(v - phantom.value(x));
      } else {
        const Eigen::RowVector3d v = l[0] * a.values.row(tri[0]) + l[1] * a.values.row(tri[1]) + l[2] * a.values.row(tri[2]);
        const double p = phantom.value(x);
        const Eigen::Vector2d ev = sym_eigenvalues(v[0] - p, v[1], v[2] - p);
        acc += std::max(std::abs(ev[0]), std::abs(ev[1]));
      }
    }
    sum += space.area(t) * acc / static_cast<double>(pts.size());
  }
  return sum;
}

}  // namespace eit
