#pragma once

#include <algorithm>
#include <memory>

#include "sqiv/kernel.hpp"
#include "sqiv/model.hpp"

namespace sqiv {

/// Everything needed to evaluate the sample moment map at a given β:
/// data, residual model, quantile index τ ∈ (0,1), bandwidth h > 0 and kernel.
struct MomentContext {
  std::shared_ptr<const Dataset> data;
  std::shared_ptr<const ResidualModel> model;
  double tau = 0.5;
  double h = 0.1;
  std::shared_ptr<const SmoothKernel> kernel = default_kernel();

  /// Validates the context. Bandwidths below kMinBandwidth are clamped with a warning.
  MomentContext(std::shared_ptr<const Dataset> data, std::shared_ptr<const ResidualModel> model,
                double tau, double h, std::shared_ptr<const SmoothKernel> kernel = default_kernel());

  MomentContext with_bandwidth(double h) const;
  MomentContext with_tau(double tau) const;
  Index dim_z() const { return data->Z().cols(); }
  Index dim_beta() const { return model->dim(); }
};

inline constexpr double kMinBandwidth = 1e-12;

/// Kernel argument -Λ/h, clamped to [-2, 2]. The kernel is flat outside
/// [-1, 1], so the clamp changes no value and keeps huge residuals at tiny h
/// from overflowing.
inline double kernel_argument(double residual, double h) {
  return std::clamp(-residual / h, -2.0, 2.0);
}

/// Residuals, moment contributions and (optionally) the moment Jacobian, all
/// computed from a single residual pass.
struct MomentEval {
  Vector residuals;      // Λ_i(β)
  Matrix contributions;  // n×d_Z, row i = g_ni(β,τ)ᵀ
  Vector moments;        // column means of contributions
  Matrix jacobian;       // d_Z×d_β, empty unless requested
};

MomentEval evaluate_moments(const MomentContext& ctx, const Vector& beta, bool with_jacobian);

/// M̂_n(β,τ) = (1/n) Σ Z_i [Ĩ(-Λ_i/h) - τ].
Vector smoothed_moments(const MomentContext& ctx, const Vector& beta);

/// Same with the indicator 1{Λ_i <= 0} in place of Ĩ(-Λ_i/h).
Vector unsmoothed_moments(const MomentContext& ctx, const Vector& beta);

/// ∂M̂_n/∂βᵀ: entry (k,j) = -(1/(nh)) Σ Ĩ'(-Λ_i/h) Z_ik ∂Λ_i/∂β_j.
Matrix moment_jacobian(const MomentContext& ctx, const Vector& beta);

/// Rows g_ni(β,τ)ᵀ; the building block of the covariance estimators.
Matrix moment_contributions(const MomentContext& ctx, const Vector& beta);

}  // namespace sqiv
