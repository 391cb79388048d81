#pragma once

#include <Eigen/Core>

namespace eit {

enum class FieldKind { scalar, tensor };

/// P1 conductivity: one value per mesh vertex, either a scalar or a symmetric
/// 2x2 tensor stored as (a11, a12, a22). lambda0/lambda1 are the ellipticity
/// bounds of the admissible set.
struct NodalField {
  FieldKind kind = FieldKind::scalar;
  Eigen::MatrixXd values;  // num_nodes x (1 or 3)
  double lambda0 = 0.0;
  double lambda1 = 0.0;

  static NodalField constant(int num_nodes, double value, double lambda0, double lambda1);
  static NodalField constant_tensor(int num_nodes, const Eigen::Matrix2d& a, double lambda0,
                                    double lambda1);
  static NodalField scalar_from(const Eigen::VectorXd& v, double lambda0, double lambda1);

  int num_nodes() const { return static_cast<int>(values.rows()); }
  int components() const { return kind == FieldKind::scalar ? 1 : 3; }
  bool is_scalar() const { return kind == FieldKind::scalar; }

  /// Conductivity matrix at node i (sigma * I for scalars).
  Eigen::Matrix2d at(int i) const;
  /// Mean of the three nodal matrices of a triangle.
  Eigen::Matrix2d mean_over(int i, int j, int k) const;

  /// c * A with bounds scaled alike (c > 0).
  NodalField scaled(double c) const;

  /// Values flattened node-major: [a(0), a(1), ...] or [a11(0), a12(0), a22(0), ...].
  Eigen::VectorXd flat() const;
  void set_flat(const Eigen::VectorXd& x);

  /// True when every nodal value lies in [lambda0 - tol, lambda1 + tol]
  /// (eigenvalues for tensors).
  bool admissible(double tol = 1e-12) const;
  /// Shape and bounds sanity plus admissibility; throws ValidationError.
  void validate(double tol = 1e-12) const;
};

}  // namespace eit
