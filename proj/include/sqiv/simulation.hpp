#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sqiv/bandwidth.hpp"
#include "sqiv/estimators.hpp"

namespace sqiv {

/// Constants of the simulation designs that are free parameters here.
struct DgpParams {
  double rho_z = 0.5;
  double rho_eps = 0.5;
  std::array<double, 5> delta{0.0, 1.0, 1.0, 1.0, 1.0};
  int burn_in = 100;
};

struct DgpSpec {
  int id = 1;
  Index n = 200;
  double tau = 0.5;
  std::uint64_t seed = 0;
};

/// Every design returns Y = (outcome, endogenous regressor), X = (constant)
/// and Z = (constant, excluded instruments...). The linear model
/// dgp_model() therefore has β = (slope, intercept).
///
///  1: binary treatment D with a binary randomized offer Z.
///  2: measurement-error time series, Gaussian AR(1) errors, instrument X_{t-1}.
///  3: as 2 with Cauchy innovations.
///  4: log-linear Euler equation with four AR(1) instruments (over-identified).
Dataset generate_dgp(int id, Index n, std::uint64_t seed, std::uint64_t stream,
                     const DgpParams& params = {});
Dataset gen_dgp1(Index n, std::uint64_t seed, std::uint64_t stream = 0);
Dataset gen_dgp2(Index n, std::uint64_t seed, std::uint64_t stream = 0, const DgpParams& params = {});
Dataset gen_dgp3(Index n, std::uint64_t seed, std::uint64_t stream = 0, const DgpParams& params = {});
Dataset gen_dgp4(Index n, std::uint64_t seed, std::uint64_t stream = 0, const DgpParams& params = {});

std::shared_ptr<const LinearResidualModel> dgp_model();

/// True value of the scored slope coefficient.
double dgp_truth(int id, double tau);

/// Bandwidth used when none is configured: 1e-4 for designs 1-3, 0.1 for 4.
BandwidthPolicy default_dgp_bandwidth(int id);

struct RobustSummary {
  double robust_rmse = 0.0;
  double median_bias = 0.0;
  double iqr = 0.0;        // raw interquartile range of the estimates
  Index replications = 0;  // finite estimates used
  Index failures = 0;      // non-finite estimates excluded
};

/// Median bias, IQR/1.349 and their root sum of squares over the finite
/// estimates. Throws InvalidArgument when no estimate is finite.
RobustSummary robust_rmse(const std::vector<double>& estimates, double truth);

struct MonteCarloConfig {
  std::vector<int> dgps{1};
  std::vector<Index> ns{200};
  std::vector<double> taus{0.5};
  std::vector<EstimatorKind> estimators{EstimatorKind::mm};
  Index reps = 100;
  std::uint64_t seed = 1;
  std::optional<BandwidthPolicy> bandwidth;  // empty → default_dgp_bandwidth
  CovarianceSpec covariance{CovarianceMode::hac, HacKernel::quadratic_spectral, std::nullopt, 1e-10};
  DgpParams params;
  AnnealingSchedule annealing;
  int threads = 1;
};

struct MonteCarloCell {
  int dgp = 1;
  double tau = 0.5;
  Index n = 0;
  EstimatorKind estimator = EstimatorKind::mm;
  double truth = 0.0;
  double bandwidth = 0.0;  // bandwidth of the first replication (fixed policies: the only one)
  RobustSummary summary;
  std::vector<double> estimates;  // NaN marks a failed replication
};

struct MonteCarloReport {
  std::vector<MonteCarloCell> cells;  // ordered by dgp, n, tau, estimator
  const MonteCarloCell& cell(int dgp, Index n, double tau, EstimatorKind est) const;
};

/// Per-replication data come from stream_id(dgp, n, rep) under the master
/// seed, so a cell's draws do not depend on the rest of the grid, and every
/// estimator and τ in a cell sees the same samples.
MonteCarloReport run_monte_carlo(const MonteCarloConfig& config);

/// Point estimate of the slope for one simulated sample; NaN on failure.
double simulate_estimate(const Dataset& data, int dgp, double tau, EstimatorKind kind, double h,
                         const MonteCarloConfig& config, std::uint64_t seed);

}  // namespace sqiv
