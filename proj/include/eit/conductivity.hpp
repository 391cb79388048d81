#pragma once

#include "eit/fem.hpp"
#include "eit/field.hpp"
#include "eit/mesh.hpp"

#include <Eigen/Core>

#include <functional>
#include <optional>
#include <vector>

namespace eit {

/// Piecewise-constant scalar conductivity: a background value plus disk and
/// polygon inclusions (later entries win where they overlap).
struct Phantom {
  struct Disk {
    Point center;
    double radius = 0.0;
    double value = 0.0;
  };
  struct PolygonInclusion {
    Polygon shape;
    double value = 0.0;
  };

  double background = 1.0;
  std::vector<Disk> disks;
  std::vector<PolygonInclusion> polygons;
  double lambda0 = 0.5;
  double lambda1 = 2.0;

  double value(const Point& p) const;
  /// Jump times perimeter summed over inclusions; exact when the inclusions
  /// are disjoint and lie inside the domain.
  double exact_tv() const;
  double min_value() const;
  double max_value() const;
  /// Throws ValidationError when values leave [lambda0, lambda1].
  void validate() const;

  /// Values at the mesh vertices (P1 interpolant).
  NodalField interpolate_on(const FeSpace& space) const;
};

/// Locates points in a triangulation with a uniform bucket grid.
class PointLocator {
 public:
  explicit PointLocator(const TriMesh& mesh);

  struct Hit {
    int triangle = -1;
    Eigen::Vector3d bary = Eigen::Vector3d::Zero();
  };
  /// Triangle containing p (within tol, measured in barycentric units);
  /// falls back to the closest triangle when p lies slightly outside.
  std::optional<Hit> locate(const Point& p, double tol = 1e-9) const;

 private:
  const TriMesh* mesh_;
  Eigen::Vector2d lo_, cell_;
  int nx_ = 1, ny_ = 1;
  std::vector<std::vector<int>> buckets_;
};

/// Value of a P1 field at an arbitrary point of the mesh (tensor as a11,a12,a22).
Eigen::VectorXd evaluate(const TriMesh& mesh, const PointLocator& locator, const NodalField& field,
                         const Point& p);

/// Uniform grid of cell-centred samples; bilinear in between.
struct RasterField {
  Eigen::Vector2d origin = Eigen::Vector2d::Zero();  // centre of cell (0, 0)
  double cell = 0.0;
  int nx = 0, ny = 0;
  int components = 1;
  Eigen::MatrixXd values;  // (nx * ny) x components, index = j * nx + i
  double lambda0 = 0.0, lambda1 = 0.0;

  Eigen::VectorXd sample(const Point& p) const;
  double min_value() const;
  double max_value() const;
};

/// Pointwise-evaluable conductivity source for mollification.
struct FieldSource {
  int components = 1;
  double lambda0 = 0.0, lambda1 = 0.0;
  std::function<Eigen::VectorXd(const Point&)> eval;  // valid inside the closed domain
};

FieldSource source_from(const Phantom& phantom);
/// Keeps references to mesh, locator and field.
FieldSource source_from(const TriMesh& mesh, const PointLocator& locator, const NodalField& field);

/// Convolution of the extended field with the radial bump of radius gamma.
/// Outside the domain the field is extended by its value at the nearest
/// boundary point up to distance gamma, then blended smoothly to
/// (lambda0 + lambda1) / 2 at distance 2 gamma. The raster covers the
/// domain bounding box grown by gamma. cell <= 0 selects gamma / 8; cells
/// coarser than gamma / 4 are rejected.
RasterField mollify(const FieldSource& source, const Polygon& domain, double gamma, double cell = 0.0);
RasterField mollify(const TriMesh& mesh, const NodalField& field, const Polygon& domain, double gamma,
                    double cell = 0.0);

/// P1 interpolant of the mollified field with gamma = h^alpha, projected
/// onto the admissible set.
NodalField discretize_bv(const FieldSource& source, const Polygon& domain, const FeSpace& target,
                         double alpha);

/// Exact total variation of a P1 field; for tensors the operator norm of
/// the matrix of entrywise total variations.
double tv_seminorm(const FeSpace& space, const NodalField& field);

/// Scalar clamp or eigenvalue clamp into [lambda0, lambda1].
NodalField project_to_admissible(const NodalField& field);

/// int_Omega |A - B|_2. Exact for scalars; tensors use a refined centroid rule.
double l1_distance(const FeSpace& space, const NodalField& a, const NodalField& b);
/// int_Omega |A - phantom| by centroid quadrature on each triangle split
/// into 4^subdivisions similar pieces; tensors are compared with phantom * I.
double l1_distance(const FeSpace& space, const NodalField& a, const Phantom& phantom, int subdivisions = 3);

}  // namespace eit
