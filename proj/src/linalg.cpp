#include "sqiv/linalg.hpp"

#include <cmath>

#include "sqiv/error.hpp"

namespace sqiv {

Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

Matrix floored_spd_inverse(const Matrix& a, double rel_floor) {
  if (a.rows() != a.cols()) throw InvalidArgument("matrix to invert must be square");
  if (!a.allFinite()) throw NumericalError("matrix to invert has non-finite entries");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(a));
  if (eig.info() != Eigen::Success) throw NumericalError("eigen-decomposition failed");
  const Vector& lambda = eig.eigenvalues();
  const double top = lambda.maxCoeff();
  if (!(top > 0.0)) throw NumericalError("matrix to invert is not positive semidefinite with positive scale");
  const double floor = rel_floor * top;
  const Vector inv = lambda.unaryExpr([floor](double l) { return 1.0 / std::max(l, floor); });
  const Matrix& v = eig.eigenvectors();
  return symmetrize(v * inv.asDiagonal() * v.transpose());
}

double min_eigenvalue(const Matrix& symmetric) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(symmetric), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

Index numerical_rank(const Matrix& a, double rel_threshold) {
  if (a.size() == 0) return 0;
  Eigen::ColPivHouseholderQR<Matrix> qr(a);
  qr.setThreshold(rel_threshold);
  return qr.rank();
}

Vector least_squares(const Matrix& x, const Vector& y) {
  if (x.rows() != y.size()) throw InvalidArgument("least squares: row mismatch");
  Eigen::ColPivHouseholderQR<Matrix> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() < x.cols()) throw IdentificationError("least squares: design matrix is rank deficient");
  return qr.solve(y);
}

Vector fitted_values(const Matrix& x, const Vector& y) { return x * least_squares(x, y); }

Vector two_stage_least_squares(const Vector& y, const Matrix& r, const Matrix& z) {
  if (r.rows() != y.size() || z.rows() != y.size())
    throw InvalidArgument("2SLS: row mismatch");
  if (z.cols() < r.cols()) throw IdentificationError("2SLS: fewer instruments than regressors");
  Eigen::ColPivHouseholderQR<Matrix> qz(z);
  qz.setThreshold(1e-10);
  if (qz.rank() < z.cols()) throw IdentificationError("2SLS: instrument block is collinear");
  const Matrix rhat = z * qz.solve(r);
  const Matrix a = rhat.transpose() * r;
  Eigen::FullPivLU<Matrix> lu(a);
  lu.setThreshold(1e-12);
  if (!lu.isInvertible()) throw IdentificationError("2SLS: projected regressors are rank deficient");
  return lu.solve(rhat.transpose() * y);
}

double sorted_quantile(const Vector& sorted, double p) {
  const Index n = sorted.size();
  if (n == 0) throw InvalidArgument("quantile of empty vector");
  const double pos = p * static_cast<double>(n - 1);
  const auto lo = static_cast<Index>(std::floor(pos));
  const Index hi = std::min(lo + 1, n - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace sqiv
