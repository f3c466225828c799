#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sqiv/bandwidth.hpp"
#include "sqiv/estimators.hpp"

namespace sqiv {

/// Quarterly macro series, one row per date t. Growth and rate columns are
/// logs realized over the period ending at t:
///   cons_growth  ln(C_t / C_{t-1})
///   real_rate    ln(1 + r_t)
/// and the raw instrument series nominal_rate, inflation and log_dp.
struct MacroSeries {
  std::vector<double> time;
  std::vector<double> cons_growth;
  std::vector<double> real_rate;
  std::vector<double> nominal_rate;
  std::vector<double> inflation;
  std::vector<double> log_dp;

  Index size() const { return static_cast<Index>(time.size()); }
  /// Equal lengths, finite values, strictly increasing time.
  void validate() const;
};

inline const std::vector<std::string>& macro_columns() {
  static const std::vector<std::string> cols{"time",         "cons_growth", "real_rate",
                                             "nominal_rate", "inflation",   "log_dp"};
  return cols;
}

MacroSeries macro_series_from_table(const NamedTable& table);
NamedTable macro_series_to_table(const MacroSeries& series);

/// Homogeneous synthetic economy: the Euler equation holds with (β, γ) at
/// every quantile up to iid N(0, noise_sd²) shocks in consumption growth.
MacroSeries synthetic_macro_series(Index n, double beta, double gamma, double noise_sd,
                                   std::uint64_t seed);

struct EulerDataOptions {
  int lag = 2;
  /// Use (1, regressor) as the instrument block instead of the lagged series.
  bool exogenous_regressor = false;
};

/// Log-linear layout: Y = (cons_growth_{t+1}, real_rate_{t+1}), X = (1),
/// Z = (1, nominal_rate, inflation, cons_growth, log_dp all at t - lag) for
/// t = lag, ..., T-2, so n = T - lag - 1.
Dataset build_euler_dataset(const MacroSeries& series, const EulerDataOptions& options = {});

/// Same rows in levels, Y = (C_{t+1}/C_t, 1 + r_{t+1}), for the nonlinear
/// residual β (1+r) (C'/C)^{-γ} - 1. Instruments are unchanged.
Dataset levels_dataset(const Dataset& loglinear);

struct EulerEstimate {
  double beta = 0.0;
  double gamma = 0.0;
  double se_beta = 0.0;
  double se_gamma = 0.0;
  double slope = 0.0;      // 1/γ (log-linear route)
  double intercept = 0.0;  // ln(β)/γ (log-linear route)
  bool misspecified = false;  // slope <= 0: the Euler mapping does not apply
  EstimateResult fit;
};

/// Linear IVQR of ln(C'/C) on (1, ln(1+r)) at quantile 1 - τ, then γ = 1/slope
/// and β = exp(intercept · γ). MM runs on projection instruments when the
/// dataset is over-identified. Throws IdentificationError for a zero slope.
EulerEstimate estimate_euler_loglinear(const Dataset& data, double tau, EstimatorKind kind, double h,
                                       const EstimatorOptions& opts = {});

/// Smoothed MM/GMM directly on the nonlinear residual at quantile τ.
/// `levels` comes from levels_dataset().
EulerEstimate estimate_euler_nonlinear(const Dataset& levels, double tau, EstimatorKind kind,
                                       double h, const EstimatorOptions& opts = {});

/// (slope, intercept) ↦ (β, γ) and back.
std::pair<double, double> euler_from_line(double slope, double intercept);
std::pair<double, double> line_from_euler(double beta, double gamma);

struct EulerRow {
  std::string label;  // "tau=0.1" or "2SLS"
  double tau = 0.0;   // NaN for the 2SLS row
  EstimatorKind estimator = EstimatorKind::mm;
  double bandwidth = 0.0;
  EulerEstimate estimate;
  bool ok = true;
  std::string message;
};

struct EulerTableConfig {
  std::vector<double> taus{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  EstimatorKind estimator = EstimatorKind::mm;
  BandwidthPolicy bandwidth = BandwidthPolicy::fixed(1e-4);
  CovarianceSpec covariance{CovarianceMode::hac, HacKernel::quadratic_spectral, std::nullopt, 1e-10};
  EulerDataOptions data;
  std::uint64_t seed = 1;
  int threads = 1;
};

/// One row per τ plus a 2SLS row. Cells that fail are kept with ok = false.
std::vector<EulerRow> decile_table(const MacroSeries& series, const EulerTableConfig& config);

}  // namespace sqiv
