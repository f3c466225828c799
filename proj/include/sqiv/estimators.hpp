#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sqiv/covariance.hpp"
#include "sqiv/moments.hpp"
#include "sqiv/optimize.hpp"

namespace sqiv {

enum class EstimatorKind { mm, one_step, gmm_two_step, gmm_identity, gmm_custom, qr, two_sls };

std::string to_string(EstimatorKind k);
/// Accepts "mm", "onestep", "gmm2s", "gmmid", "qr", "2sls" (and "iv" for 2SLS).
EstimatorKind parse_estimator(const std::string& name);

struct EstimatorOptions {
  CovarianceSpec covariance;
  std::optional<Vector> initial;
  double moment_tol = 0.0;  // 0 → 1e-8 · d_Z
  NewtonOptions newton = [] {
    NewtonOptions o;
    o.tol = 0.0;  // replaced by moment_tol
    o.max_iter = 60;
    return o;
  }();
  /// Bandwidth ladder for MM when Newton fails at the target bandwidth.
  bool continuation = true;
  AnnealingSchedule annealing;
  std::uint64_t seed = 0;
  /// Bandwidth used for the Jacobian inside the covariance estimate. Defaults
  /// to max(h, 1.06 · min(sd, IQR/1.349) · n^{-1/5}) of the residuals at β̂.
  std::optional<double> cov_bandwidth;
  /// Skip the covariance (Monte Carlo runs only need point estimates).
  bool compute_covariance = true;
  /// After smoothed GMM, anneal once more on the unsmoothed criterion.
  bool unsmoothed_final = false;
  int polish_max_iter = 100;
};

struct EstimateResult {
  Vector beta_hat;
  Matrix cov;
  Vector std_errors;
  double tau = 0.0;
  double bandwidth_used = 0.0;
  double cov_bandwidth = 0.0;  // bandwidth of the Jacobian inside cov (0: not computed)
  EstimatorKind kind = EstimatorKind::mm;
  SolverReport solver;
  double moment_norm = 0.0;  // ‖M̂_n(β̂)‖ (not meaningful for 2SLS)
  double criterion = 0.0;    // M̂ᵀŴM̂ for GMM
  std::vector<std::string> warnings;
};

/// Smoothed MM: solves M̂_n(β,τ) = 0 for exactly identified models. Throws
/// SolverError (with the best residual norm in the message) on failure.
EstimateResult estimate_mm(const MomentContext& ctx, const EstimatorOptions& opts = {});

/// One Newton–Raphson-type GMM step from beta_bar with weighting Ω̄⁻¹.
EstimateResult estimate_one_step(const MomentContext& ctx, const Vector& beta_bar,
                                 const EstimatorOptions& opts = {});

struct Weighting {
  enum class Kind { identity, two_step, custom };
  Kind kind = Kind::two_step;
  Matrix matrix;  // used when kind == custom

  static Weighting identity() { return {Kind::identity, {}}; }
  static Weighting two_step() { return {Kind::two_step, {}}; }
  static Weighting custom(Matrix w) { return {Kind::custom, std::move(w)}; }
};

/// Smoothed GMM: simulated annealing plus Gauss–Newton polish on M̂ᵀŴM̂.
EstimateResult estimate_gmm(const MomentContext& ctx, const Weighting& weighting,
                            const EstimatorOptions& opts = {});

/// Replace the instrument block by (X, fitted values of the lone endogenous
/// regressor on Z). Requires a constant column in Z.
Dataset projection_instruments(const Dataset& data, Index endog_col);

/// Classical two-stage least squares for the linear model's coefficients.
EstimateResult estimate_2sls(const Dataset& data, const LinearResidualModel& model,
                             const CovarianceSpec& cov = {});

/// Quantile regression ignoring endogeneity: smoothed MM with Z = regressors.
EstimateResult estimate_qr(const Dataset& data, std::shared_ptr<const LinearResidualModel> model,
                           double tau, double h, const EstimatorOptions& opts = {});

/// Starting value used by the GMM pipeline: MM when exactly identified, MM on
/// projection instruments for linear models with one endogenous regressor,
/// the model's own initial guess otherwise.
EstimateResult initial_estimate(const MomentContext& ctx, const EstimatorOptions& opts = {});

}  // namespace sqiv
