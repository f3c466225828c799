#pragma once

#include <Eigen/Dense>

namespace sqiv {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// (A + Aᵀ) / 2.
Matrix symmetrize(const Matrix& a);

/// Inverse of a symmetric PSD matrix after flooring its eigenvalues at
/// rel_floor * (largest eigenvalue). Throws NumericalError if the matrix is
/// zero or has non-finite entries.
Matrix floored_spd_inverse(const Matrix& a, double rel_floor = 1e-10);

double min_eigenvalue(const Matrix& symmetric);

/// Rank via column-pivoted QR with a relative threshold.
Index numerical_rank(const Matrix& a, double rel_threshold = 1e-10);

/// Least squares coefficients of y on the columns of x; throws
/// IdentificationError on a rank-deficient design.
Vector least_squares(const Matrix& x, const Vector& y);

/// Fitted values x (xᵀx)⁻¹ xᵀ y.
Vector fitted_values(const Matrix& x, const Vector& y);

/// Two-stage least squares coefficients of y on regressors r using
/// instruments z: (r̂ᵀ r)⁻¹ r̂ᵀ y with r̂ = P_z r.
Vector two_stage_least_squares(const Vector& y, const Matrix& r, const Matrix& z);

/// Empirical quantile with linear interpolation between order statistics
/// (the "type 7" definition). `sorted` must be ascending and non-empty.
double sorted_quantile(const Vector& sorted, double p);

}  // namespace sqiv
