#include "sqiv/euler.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "sqiv/error.hpp"
#include "sqiv/parallel.hpp"
#include "sqiv/rng.hpp"

namespace sqiv {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

void MacroSeries::validate() const {
  const std::size_t n = time.size();
  for (const auto* col : {&cons_growth, &real_rate, &nominal_rate, &inflation, &log_dp})
    if (col->size() != n) throw InvalidArgument("macro series columns have different lengths");
  for (std::size_t t = 0; t < n; ++t) {
    for (const auto* col : {&time, &cons_growth, &real_rate, &nominal_rate, &inflation, &log_dp})
      if (!std::isfinite((*col)[t]))
        throw InvalidArgument("macro series has a non-finite value at row " + std::to_string(t + 1));
    if (t > 0 && !(time[t] > time[t - 1]))
      throw InvalidArgument("macro series time index must be strictly increasing (row " +
                            std::to_string(t + 1) + ")");
  }
}

MacroSeries macro_series_from_table(const NamedTable& table) {
  MacroSeries s;
  std::vector<double>* targets[] = {&s.time,         &s.cons_growth, &s.real_rate,
                                    &s.nominal_rate, &s.inflation,   &s.log_dp};
  const auto& names = macro_columns();
  for (std::size_t k = 0; k < names.size(); ++k) {
    const Index c = table.column(names[k]);
    const auto col = table.values.col(c);
    targets[k]->assign(col.data(), col.data() + col.size());
  }
  s.validate();
  return s;
}

NamedTable macro_series_to_table(const MacroSeries& s) {
  s.validate();
  NamedTable t;
  t.names = macro_columns();
  t.values.resize(s.size(), 6);
  const std::vector<double>* cols[] = {&s.time,         &s.cons_growth, &s.real_rate,
                                       &s.nominal_rate, &s.inflation,   &s.log_dp};
  for (Index c = 0; c < 6; ++c)
    for (Index r = 0; r < s.size(); ++r) t.values(r, c) = (*cols[c])[static_cast<std::size_t>(r)];
  return t;
}

MacroSeries synthetic_macro_series(Index n, double beta, double gamma, double noise_sd,
                                   std::uint64_t seed) {
  if (n < 10) throw InvalidArgument("synthetic series needs at least 10 periods");
  if (!(beta > 0.0) || !(gamma > 0.0) || !(noise_sd >= 0.0))
    throw InvalidArgument("synthetic series needs beta > 0, gamma > 0, noise_sd >= 0");
  Philox4x32 rng(seed, stream_id(0xE0, 0, 0));
  MacroSeries s;
  const int burn = 200;
  double nominal = 0.012, inflation = 0.008, dp = -3.5, real = 0.004;
  for (Index t = -burn; t < n; ++t) {
    const double prev_nominal = nominal;
    nominal = 0.012 + 0.9 * (nominal - 0.012) + 0.004 * rng.normal();
    inflation = 0.008 + 0.6 * (inflation - 0.008) + 0.3 * (prev_nominal - 0.012) + 0.002 * rng.normal();
    dp = -3.5 + 0.95 * (dp + 3.5) + 0.05 * rng.normal();
    real = prev_nominal - inflation + 0.001 * rng.normal();
    const double growth = std::log(beta) / gamma + real / gamma + noise_sd * rng.normal();
    if (t < 0) continue;
    s.time.push_back(static_cast<double>(t + 1));
    s.cons_growth.push_back(growth);
    s.real_rate.push_back(real);
    s.nominal_rate.push_back(nominal);
    s.inflation.push_back(inflation);
    s.log_dp.push_back(dp);
  }
  return s;
}

Dataset build_euler_dataset(const MacroSeries& s, const EulerDataOptions& o) {
  s.validate();
  if (o.lag < 0) throw InvalidArgument("instrument lag must be non-negative");
  const Index total = s.size();
  const Index n = total - o.lag - 1;
  if (n < 3) throw InvalidArgument("macro series too short for lag " + std::to_string(o.lag));
  Matrix y(n, 2);
  Matrix x = Matrix::Ones(n, 1);
  const Index dz = o.exogenous_regressor ? 2 : 5;
  Matrix z(n, dz);
  for (Index i = 0; i < n; ++i) {
    const auto t = static_cast<std::size_t>(i + o.lag);  // information date
    const auto lagged = static_cast<std::size_t>(i);     // t - lag
    y(i, 0) = s.cons_growth[t + 1];
    y(i, 1) = s.real_rate[t + 1];
    z(i, 0) = 1.0;
    if (o.exogenous_regressor) {
      z(i, 1) = y(i, 1);
    } else {
      z(i, 1) = s.nominal_rate[lagged];
      z(i, 2) = s.inflation[lagged];
      z(i, 3) = s.cons_growth[lagged];
      z(i, 4) = s.log_dp[lagged];
    }
  }
  std::vector<std::string> z_names{"(intercept)"};
  if (o.exogenous_regressor) {
    z_names.push_back("real_rate");
  } else {
    const std::string suffix = "_lag" + std::to_string(o.lag);
    for (const char* nm : {"nominal_rate", "inflation", "cons_growth", "log_dp"})
      z_names.push_back(std::string(nm) + suffix);
  }
  return Dataset(std::move(y), std::move(x), std::move(z), {0}, {"cons_growth", "real_rate"},
                 {"(intercept)"}, std::move(z_names));
}

Dataset levels_dataset(const Dataset& loglinear) {
  if (loglinear.Y().cols() < 2) throw InvalidArgument("levels dataset needs two Y columns");
  Matrix y = loglinear.Y().leftCols(2).array().exp().matrix();
  return Dataset(std::move(y), loglinear.X(), loglinear.Z(), loglinear.x_in_z(),
                 {"cons_ratio", "gross_return"}, loglinear.x_names(), loglinear.z_names());
}

std::pair<double, double> euler_from_line(double slope, double intercept) {
  if (slope == 0.0 || !std::isfinite(slope))
    throw IdentificationError("zero slope: gamma is not identified");
  const double gamma = 1.0 / slope;
  return {std::exp(intercept * gamma), gamma};
}

std::pair<double, double> line_from_euler(double beta, double gamma) {
  if (gamma == 0.0 || !(beta > 0.0)) throw InvalidArgument("need beta > 0 and gamma != 0");
  return {1.0 / gamma, std::log(beta) / gamma};
}

namespace {

std::shared_ptr<const LinearResidualModel> loglinear_model() {
  return linear_residual_model(0, {1}, {0});
}

EstimateResult run_kind(const std::shared_ptr<const Dataset>& data,
                        const std::shared_ptr<const ResidualModel>& model, double tau, double h,
                        EstimatorKind kind, const EstimatorOptions& opts,
                        const std::shared_ptr<const Dataset>& exact) {
  switch (kind) {
    case EstimatorKind::mm:
      return estimate_mm(MomentContext(exact, model, tau, h), opts);
    case EstimatorKind::one_step: {
      const MomentContext ctx(data, model, tau, h);
      EstimatorOptions o = opts;
      if (!o.initial) o.initial = estimate_mm(MomentContext(exact, model, tau, h), opts).beta_hat;
      return estimate_one_step(ctx, *o.initial, o);
    }
    case EstimatorKind::gmm_two_step:
    case EstimatorKind::gmm_identity: {
      EstimatorOptions o = opts;
      if (!o.initial && exact != data) {
        EstimatorOptions mo = opts;
        mo.compute_covariance = false;
        o.initial = estimate_mm(MomentContext(exact, model, tau, h), mo).beta_hat;
      }
      const Weighting w = kind == EstimatorKind::gmm_two_step ? Weighting::two_step() : Weighting::identity();
      return estimate_gmm(MomentContext(data, model, tau, h), w, o);
    }
    default:
      throw InvalidArgument("Euler estimation supports mm, onestep, gmm2s and gmmid");
  }
}

/// Projection instruments built from ln(1+r) so both routes share them.
std::shared_ptr<const Dataset> exact_instruments(const Dataset& data, bool levels) {
  if (data.Z().cols() <= 2) return nullptr;
  if (!levels) return std::make_shared<const Dataset>(projection_instruments(data, 1));
  const Dataset logs(data.Y().array().log().matrix(), data.X(), data.Z(), data.x_in_z(),
                     data.y_names(), data.x_names(), data.z_names());
  const Dataset proj = projection_instruments(logs, 1);
  return std::make_shared<const Dataset>(data.with_instruments(proj.Z(), proj.x_in_z(), proj.z_names()));
}

}  // namespace

EulerEstimate estimate_euler_loglinear(const Dataset& data, double tau, EstimatorKind kind, double h,
                                       const EstimatorOptions& opts) {
  if (!(tau > 0.0 && tau < 1.0)) throw InvalidArgument("tau must lie in (0, 1)");
  auto model = loglinear_model();
  EulerEstimate out;
  if (kind == EstimatorKind::two_sls) {
    out.fit = estimate_2sls(data, *model, opts.covariance);
  } else {
    auto shared = std::make_shared<const Dataset>(data);
    auto exact = exact_instruments(data, false);
    out.fit = run_kind(shared, model, 1.0 - tau, h, kind, opts, exact ? exact : shared);
  }
  out.fit.tau = kind == EstimatorKind::two_sls ? kNaN : tau;
  out.slope = out.fit.beta_hat[0];
  out.intercept = out.fit.beta_hat[1];
  const auto [beta, gamma] = euler_from_line(out.slope, out.intercept);
  out.beta = beta;
  out.gamma = gamma;
  out.misspecified = !(out.slope > 0.0);
  // Delta method: γ = 1/s, β = exp(a/s).
  if (out.fit.cov.rows() == 2 && out.fit.cov.allFinite()) {
    Matrix jac(2, 2);
    jac << -beta * out.intercept / (out.slope * out.slope), beta / out.slope,
        -1.0 / (out.slope * out.slope), 0.0;
    const Matrix c = jac * out.fit.cov * jac.transpose();
    out.se_beta = std::sqrt(std::max(0.0, c(0, 0)));
    out.se_gamma = std::sqrt(std::max(0.0, c(1, 1)));
  } else {
    out.se_beta = out.se_gamma = kNaN;
  }
  return out;
}

EulerEstimate estimate_euler_nonlinear(const Dataset& levels, double tau, EstimatorKind kind,
                                       double h, const EstimatorOptions& opts) {
  if (!(tau > 0.0 && tau < 1.0)) throw InvalidArgument("tau must lie in (0, 1)");
  auto model = euler_residual_model(0, 1);
  model->validate(levels);
  auto shared = std::make_shared<const Dataset>(levels);
  auto exact = exact_instruments(levels, true);
  EstimatorOptions o = opts;
  if (!o.initial) {
    // Start from the log-linear solution so that, when the moment equations
    // have several roots, both routes report the same one.
    try {
      const Dataset logs(levels.Y().array().log().matrix(), levels.X(), levels.Z(), levels.x_in_z(),
                         levels.y_names(), levels.x_names(), levels.z_names());
      EstimatorOptions lo = opts;
      lo.compute_covariance = false;
      EulerEstimate seed = estimate_euler_loglinear(logs, tau, kind, h, lo);
      // Near a root the nonlinear residual is about -γ times the linear one,
      // so the matching log-linear bandwidth is h / γ.
      if (!seed.misspecified && std::isfinite(seed.gamma) && seed.gamma > 1.0) {
        try {
          seed = estimate_euler_loglinear(logs, tau, kind, h / seed.gamma, lo);
        } catch (const Error&) {
        }
      }
      if (!seed.misspecified && std::isfinite(seed.beta) && std::isfinite(seed.gamma)) {
        Vector start(2);
        start << seed.beta, seed.gamma;
        o.initial = start;
      }
    } catch (const Error&) {
    }
  }
  EulerEstimate out;
  out.fit = run_kind(shared, model, tau, h, kind, o, exact ? exact : shared);
  out.beta = out.fit.beta_hat[0];
  out.gamma = out.fit.beta_hat[1];
  out.se_beta = out.fit.std_errors.size() == 2 ? out.fit.std_errors[0] : kNaN;
  out.se_gamma = out.fit.std_errors.size() == 2 ? out.fit.std_errors[1] : kNaN;
  if (out.gamma != 0.0) {
    out.slope = 1.0 / out.gamma;
    out.intercept = std::log(out.beta) / out.gamma;
  } else {
    out.slope = out.intercept = kNaN;
  }
  out.misspecified = !(out.gamma > 0.0);
  return out;
}

std::vector<EulerRow> decile_table(const MacroSeries& series, const EulerTableConfig& cfg) {
  if (cfg.taus.empty()) throw InvalidArgument("no quantiles requested");
  for (double t : cfg.taus)
    if (!(t > 0.0 && t < 1.0)) throw InvalidArgument("tau must lie in (0, 1)");
  const Dataset data = build_euler_dataset(series, cfg.data);
  const auto model = loglinear_model();
  std::vector<EulerRow> rows(cfg.taus.size() + 1);

  parallel_for(cfg.taus.size(), cfg.threads, [&](std::size_t k) {
    EulerRow& row = rows[k];
    row.tau = cfg.taus[k];
    std::ostringstream label;
    label.precision(6);
    label << "tau=" << row.tau;
    row.label = label.str();
    row.estimator = cfg.estimator;
    try {
      row.bandwidth = select_bandwidth(cfg.bandwidth, data, *model, 1.0 - row.tau);
      EstimatorOptions opts;
      opts.covariance = cfg.covariance;
      opts.seed = cfg.seed + k;
      row.estimate = estimate_euler_loglinear(data, row.tau, cfg.estimator, row.bandwidth, opts);
      row.ok = true;
      row.message = row.estimate.misspecified ? "non-positive slope" : "ok";
    } catch (const Error& e) {
      row.ok = false;
      row.message = e.what();
      row.estimate.beta = row.estimate.gamma = row.estimate.se_beta = row.estimate.se_gamma = kNaN;
      row.estimate.slope = row.estimate.intercept = kNaN;
    }
  });

  EulerRow& base = rows.back();
  base.label = "2SLS";
  base.tau = kNaN;
  base.estimator = EstimatorKind::two_sls;
  base.bandwidth = kNaN;
  try {
    base.estimate = estimate_euler_loglinear(data, 0.5, EstimatorKind::two_sls, 0.0,
                                             [&] {
                                               EstimatorOptions o;
                                               o.covariance = cfg.covariance;
                                               return o;
                                             }());
    base.ok = true;
    base.message = base.estimate.misspecified ? "non-positive slope" : "ok";
  } catch (const Error& e) {
    base.ok = false;
    base.message = e.what();
  }
  return rows;
}

}  // namespace sqiv
