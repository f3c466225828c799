#include "sqiv/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/chi_squared.hpp>

#include "sqiv/error.hpp"
#include "sqiv/parallel.hpp"
#include "sqiv/rng.hpp"

namespace sqiv {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Dataset assemble(const Vector& y, const Vector& endog, const Matrix& excluded,
                 const std::string& endog_name, std::vector<std::string> excluded_names) {
  const Index n = y.size();
  Matrix ym(n, 2);
  ym.col(0) = y;
  ym.col(1) = endog;
  Matrix x = Matrix::Ones(n, 1);
  Matrix z(n, 1 + excluded.cols());
  z.col(0).setOnes();
  z.rightCols(excluded.cols()) = excluded;
  std::vector<std::string> z_names{"(intercept)"};
  for (auto& s : excluded_names) z_names.push_back(std::move(s));
  return Dataset(std::move(ym), std::move(x), std::move(z), {0}, {"y", endog_name}, {"(intercept)"},
                 std::move(z_names));
}

void check_n(Index n) {
  if (n < 2) throw InvalidArgument("simulated sample size must be at least 2");
}

}  // namespace

Dataset gen_dgp1(Index n, std::uint64_t seed, std::uint64_t stream) {
  check_n(n);
  Philox4x32 rng(seed, stream);
  const boost::math::chi_squared chi3(3.0);
  Vector y(n), d(n);
  Matrix z(n, 1);
  for (Index i = 0; i < n; ++i) {
    const double zi = rng.bernoulli(0.5) ? 1.0 : 0.0;
    const double u = rng.uniform();
    const double p = zi * std::min(1.0, 4.0 * u / 3.0);
    const double di = rng.bernoulli(p) ? 1.0 : 0.0;
    z(i, 0) = zi;
    d[i] = di;
    y[i] = 60.0 + boost::math::quantile(chi3, u) + di * 100.0 * (u - 0.5);
  }
  return assemble(y, d, z, "d", {"z"});
}

namespace {

Dataset measurement_error_series(Index n, std::uint64_t seed, std::uint64_t stream,
                                 const DgpParams& p, bool cauchy) {
  check_n(n);
  if (!(std::abs(p.rho_z) < 1.0) || !(std::abs(p.rho_eps) < 1.0))
    throw InvalidArgument("AR coefficients must lie in (-1, 1)");
  Philox4x32 rng(seed, stream);
  const double sz = std::sqrt(1.0 - p.rho_z * p.rho_z);
  const double se = std::sqrt(1.0 - p.rho_eps * p.rho_eps);
  double zlat = rng.normal();
  double eps = cauchy ? rng.cauchy() : rng.normal();
  double x_prev = zlat + rng.normal();
  Vector y(n), x(n);
  Matrix inst(n, 1);
  for (Index t = 0; t < n; ++t) {
    zlat = p.rho_z * zlat + sz * rng.normal();
    const double eta = rng.normal();
    eps = cauchy ? p.rho_eps * eps + (1.0 - p.rho_eps) * rng.cauchy()
                 : p.rho_eps * eps + se * rng.normal();
    const double xt = zlat + eta;
    y[t] = zlat + eps;
    x[t] = xt;
    inst(t, 0) = x_prev;
    x_prev = xt;
  }
  return assemble(y, x, inst, "x", {"x_lag1"});
}

}  // namespace

Dataset gen_dgp2(Index n, std::uint64_t seed, std::uint64_t stream, const DgpParams& params) {
  return measurement_error_series(n, seed, stream, params, false);
}

Dataset gen_dgp3(Index n, std::uint64_t seed, std::uint64_t stream, const DgpParams& params) {
  return measurement_error_series(n, seed, stream, params, true);
}

Dataset gen_dgp4(Index n, std::uint64_t seed, std::uint64_t stream, const DgpParams& p) {
  check_n(n);
  if (p.burn_in < 0) throw InvalidArgument("burn-in must be non-negative");
  Philox4x32 rng(seed, stream);
  Matrix corr = Matrix::Constant(4, 4, 0.1);
  corr.diagonal().setOnes();
  const Matrix chol = Eigen::LLT<Matrix>(corr).matrixL();
  const double sd_u = 2.0, sd_v = 2.0, cov_uv = 0.8;
  const double u_on_v = cov_uv / sd_v;
  const double u_resid = std::sqrt(sd_u * sd_u - u_on_v * u_on_v);
  const double beta = 0.99, eis = 0.2;

  Eigen::Vector4d zt = Eigen::Vector4d::Zero();
  Eigen::Vector4d shock;
  Vector y(n), x(n);
  Matrix inst(n, 4);
  for (Index t = -static_cast<Index>(p.burn_in); t < n; ++t) {
    for (int j = 0; j < 4; ++j) shock[j] = rng.normal();
    const Eigen::Vector4d eta = chol * shock;
    for (int j = 0; j < 4; ++j) zt[j] = 0.2 * (j + 1) * zt[j] + eta[j];
    const double e1 = rng.normal(), e2 = rng.normal();
    if (t < 0) continue;
    const double v = sd_v * e1;
    const double u = u_on_v * e1 + u_resid * e2;
    const double xt = p.delta[0] + p.delta[1] * zt[0] +
                      v * (p.delta[2] * zt[1] + p.delta[3] * zt[2] + p.delta[4] * zt[3]) + v;
    x[t] = xt;
    y[t] = std::log(beta) * eis + xt * eis + u;
    inst.row(t) = zt.transpose();
  }
  return assemble(y, x, inst, "x", {"z1", "z2", "z3", "z4"});
}

Dataset generate_dgp(int id, Index n, std::uint64_t seed, std::uint64_t stream,
                     const DgpParams& params) {
  switch (id) {
    case 1: return gen_dgp1(n, seed, stream);
    case 2: return gen_dgp2(n, seed, stream, params);
    case 3: return gen_dgp3(n, seed, stream, params);
    case 4: return gen_dgp4(n, seed, stream, params);
    default: throw InvalidArgument("DGP id must be 1, 2, 3 or 4");
  }
}

std::shared_ptr<const LinearResidualModel> dgp_model() {
  return linear_residual_model(0, {1}, {0});
}

double dgp_truth(int id, double tau) {
  switch (id) {
    case 1: return 100.0 * (tau - 0.5);
    case 2:
    case 3: return 1.0;
    case 4: return 0.2;
    default: throw InvalidArgument("DGP id must be 1, 2, 3 or 4");
  }
}

BandwidthPolicy default_dgp_bandwidth(int id) {
  return BandwidthPolicy::fixed(id == 4 ? 0.1 : 1e-4);
}

RobustSummary robust_rmse(const std::vector<double>& estimates, double truth) {
  std::vector<double> ok;
  ok.reserve(estimates.size());
  for (double e : estimates)
    if (std::isfinite(e)) ok.push_back(e);
  RobustSummary s;
  s.failures = static_cast<Index>(estimates.size() - ok.size());
  s.replications = static_cast<Index>(ok.size());
  if (ok.empty()) throw InvalidArgument("robust RMSE: every replication failed");
  std::sort(ok.begin(), ok.end());
  const Eigen::Map<const Vector> sorted(ok.data(), static_cast<Index>(ok.size()));
  s.median_bias = sorted_quantile(sorted, 0.5) - truth;
  s.iqr = sorted_quantile(sorted, 0.75) - sorted_quantile(sorted, 0.25);
  const double spread = s.iqr / 1.349;
  s.robust_rmse = std::sqrt(s.median_bias * s.median_bias + spread * spread);
  return s;
}

const MonteCarloCell& MonteCarloReport::cell(int dgp, Index n, double tau, EstimatorKind est) const {
  for (const auto& c : cells)
    if (c.dgp == dgp && c.n == n && c.tau == tau && c.estimator == est) return c;
  throw InvalidArgument("no such Monte Carlo cell");
}

double simulate_estimate(const Dataset& data, int dgp, double tau, EstimatorKind kind, double h,
                         const MonteCarloConfig& config, std::uint64_t seed) {
  (void)dgp;
  auto model = dgp_model();
  EstimatorOptions opts;
  opts.compute_covariance = false;
  opts.covariance = config.covariance;
  opts.annealing = config.annealing;
  opts.seed = seed;
  try {
    auto shared = std::make_shared<const Dataset>(data);
    switch (kind) {
      case EstimatorKind::two_sls:
        return estimate_2sls(data, *model, config.covariance).beta_hat[0];
      case EstimatorKind::qr:
        return estimate_qr(data, model, tau, h, opts).beta_hat[0];
      case EstimatorKind::mm: {
        if (data.Z().cols() > model->dim())
          shared = std::make_shared<const Dataset>(projection_instruments(data, 1));
        return estimate_mm(MomentContext(shared, model, tau, h), opts).beta_hat[0];
      }
      case EstimatorKind::one_step: {
        const MomentContext ctx(shared, model, tau, h);
        const EstimateResult init = initial_estimate(ctx, opts);
        return estimate_one_step(ctx, init.beta_hat, opts).beta_hat[0];
      }
      case EstimatorKind::gmm_two_step:
        return estimate_gmm(MomentContext(shared, model, tau, h), Weighting::two_step(), opts).beta_hat[0];
      case EstimatorKind::gmm_identity:
        return estimate_gmm(MomentContext(shared, model, tau, h), Weighting::identity(), opts).beta_hat[0];
      case EstimatorKind::gmm_custom:
        throw InvalidArgument("custom weighting is not available in simulations");
    }
  } catch (const Error&) {
    return kNaN;
  }
  return kNaN;
}

namespace {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

MonteCarloReport run_monte_carlo(const MonteCarloConfig& cfg) {
  if (cfg.reps < 1) throw InvalidArgument("reps must be at least 1");
  if (cfg.dgps.empty() || cfg.ns.empty() || cfg.taus.empty() || cfg.estimators.empty())
    throw InvalidArgument("empty simulation grid");
  for (int d : cfg.dgps) dgp_truth(d, 0.5);
  for (double t : cfg.taus)
    if (!(t > 0.0 && t < 1.0)) throw InvalidArgument("tau must lie in (0, 1)");
  for (Index n : cfg.ns) check_n(n);

  MonteCarloReport report;
  const std::size_t per_block = cfg.taus.size() * cfg.estimators.size();
  for (int d : cfg.dgps)
    for (Index n : cfg.ns)
      for (double tau : cfg.taus)
        for (EstimatorKind e : cfg.estimators) {
          MonteCarloCell c;
          c.dgp = d;
          c.n = n;
          c.tau = tau;
          c.estimator = e;
          c.truth = dgp_truth(d, tau);
          c.bandwidth = kNaN;
          c.estimates.assign(static_cast<std::size_t>(cfg.reps), kNaN);
          report.cells.push_back(std::move(c));
        }

  // One task = one simulated sample, shared by every τ and estimator.
  const std::size_t blocks = cfg.dgps.size() * cfg.ns.size();
  const std::size_t reps = static_cast<std::size_t>(cfg.reps);
  const std::size_t tasks = blocks * reps;
  std::vector<std::vector<double>> bandwidths(blocks, std::vector<double>(per_block, kNaN));
  parallel_for(tasks, cfg.threads, [&](std::size_t t) {
      const std::size_t block = t / reps;
      const std::size_t rep = t % reps;
      const int dgp = cfg.dgps[block / cfg.ns.size()];
      const Index n = cfg.ns[block % cfg.ns.size()];
      const auto stream = stream_id(static_cast<std::uint32_t>(dgp), static_cast<std::uint32_t>(n),
                                    static_cast<std::uint32_t>(rep));
      const Dataset data = generate_dgp(dgp, n, cfg.seed, stream, cfg.params);
      const BandwidthPolicy policy = cfg.bandwidth ? *cfg.bandwidth : default_dgp_bandwidth(dgp);
      for (std::size_t k = 0; k < per_block; ++k) {
        const double tau = cfg.taus[k / cfg.estimators.size()];
        const EstimatorKind est = cfg.estimators[k % cfg.estimators.size()];
        double h = kNaN, value = kNaN;
        try {
          h = select_bandwidth(policy, data, *dgp_model(), tau);
          value = simulate_estimate(data, dgp, tau, est, h, cfg, mix64(cfg.seed ^ mix64(stream + k)));
        } catch (const Error&) {
          value = kNaN;
        }
        report.cells[block * per_block + k].estimates[rep] = value;
        if (rep == 0) bandwidths[block][k] = h;
      }
  });

  for (std::size_t b = 0; b < blocks; ++b)
    for (std::size_t k = 0; k < per_block; ++k) {
      MonteCarloCell& c = report.cells[b * per_block + k];
      c.bandwidth = bandwidths[b][k];
      try {
        c.summary = robust_rmse(c.estimates, c.truth);
      } catch (const InvalidArgument&) {
        c.summary = RobustSummary{kNaN, kNaN, kNaN, 0, static_cast<Index>(c.estimates.size())};
      }
    }
  return report;
}

}  // namespace sqiv
