#include "sqiv/cli.hpp"

#include <cmath>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <utility>

#include <CLI11.hpp>
#include <json.hpp>

#include "sqiv/bandwidth.hpp"
#include "sqiv/estimators.hpp"
#include "sqiv/euler.hpp"
#include "sqiv/io.hpp"
#include "sqiv/parallel.hpp"
#include "sqiv/simulation.hpp"

namespace sqiv {

using json = nlohmann::ordered_json;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument:
    case ErrorKind::config:
      return exit_config;
    case ErrorKind::parse:
      return exit_parse;
    case ErrorKind::identification:
    case ErrorKind::numerical:
    case ErrorKind::solver:
      return exit_estimation;
    case ErrorKind::io:
      return exit_io;
  }
  return exit_internal;
}

namespace {

double parse_number(const std::string& text, const std::string& field) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(text, &pos);
    if (pos != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(field + ": not a number: '" + text + "'");
  }
}

}  // namespace

std::vector<double> parse_tau_list(const std::vector<std::string>& items, const std::string& field) {
  std::vector<std::string> pieces;
  for (const auto& raw : items) {
    std::string cur;
    for (char c : raw) {
      if (c == ',') {
        pieces.push_back(cur);
        cur.clear();
      } else if (c != ' ' && c != '[' && c != ']' && c != '"') {
        cur.push_back(c);
      }
    }
    pieces.push_back(cur);
  }
  std::vector<double> taus;
  for (const auto& item : pieces) {
    if (item.empty()) continue;
    const auto dots = item.find("..");
    if (dots == std::string::npos) {
      taus.push_back(parse_number(item, field));
      continue;
    }
    const double lo = parse_number(item.substr(0, dots), field);
    std::string rest = item.substr(dots + 2);
    double step = 0.1;
    if (const auto colon = rest.find(':'); colon != std::string::npos) {
      step = parse_number(rest.substr(colon + 1), field);
      rest = rest.substr(0, colon);
    }
    const double hi = parse_number(rest, field);
    if (!(step > 0.0) || hi < lo) throw ConfigError(field + ": bad range '" + item + "'");
    const auto count = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
    for (long k = 0; k <= count; ++k) {
      // Round to the step's decimal grid so 0.1..0.9 yields exactly 0.3, 0.7, ...
      const double v = lo + static_cast<double>(k) * step;
      taus.push_back(std::round(v * 1e10) / 1e10);
    }
  }
  if (taus.empty()) throw ConfigError(field + ": no quantile levels given");
  for (double t : taus)
    if (!(t > 0.0 && t < 1.0)) throw ConfigError(field + ": quantile level " + format_sig6(t) + " outside (0, 1)");
  return taus;
}

namespace {

// ---------------------------------------------------------------------------
// Output helpers

json num6(double v) {
  if (!std::isfinite(v)) return nullptr;
  return std::stod(format_sig6(v));
}

json numfull(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

/// Resolved settings, embedded in every output file.
using Settings = std::vector<std::pair<std::string, std::string>>;

std::string csv_header(const Settings& settings) {
  std::string out;
  for (const auto& [k, v] : settings) out += "# " + k + " = " + v + "\n";
  return out;
}

json settings_json(const Settings& settings) {
  json j = json::object();
  for (const auto& [k, v] : settings) j[k] = v;
  return j;
}

std::string join(const std::vector<std::string>& items, const char* sep = ",") {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? sep : "") + items[i];
  return out;
}

std::string join_numbers(const std::vector<double>& v) {
  std::vector<std::string> s;
  for (double x : v) s.push_back(format_full(x));
  return join(s);
}

struct Output {
  std::string prefix;
  std::string format = "both";  // csv | json | both

  std::vector<std::pair<std::string, std::string>> files(const std::string& csv,
                                                         const json& j) const {
    std::vector<std::pair<std::string, std::string>> out;
    if (format == "csv" || format == "both") out.emplace_back(prefix + ".csv", csv);
    if (format == "json" || format == "both") out.emplace_back(prefix + ".json", j.dump(2) + "\n");
    return out;
  }
};

void write_all(const std::vector<std::pair<std::string, std::string>>& files, std::ostream& out) {
  for (const auto& [path, content] : files) {
    write_file_atomic(path, content);
    out << "wrote " << path << "\n";
  }
}

CovarianceSpec covariance_from(const std::string& mode, const std::string& kernel,
                               const std::string& bandwidth) {
  try {
    return parse_covariance(mode, kernel, bandwidth);
  } catch (const Error& e) {
    throw ConfigError(std::string("covariance: ") + e.what());
  }
}

BandwidthPolicy bandwidth_from(const std::string& text, const std::string& field) {
  try {
    return BandwidthPolicy::parse(text);
  } catch (const Error& e) {
    throw ConfigError(field + ": " + e.what());
  }
}

EstimatorKind estimator_from(const std::string& text, const std::string& field) {
  try {
    return parse_estimator(text);
  } catch (const Error& e) {
    throw ConfigError(field + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// estimate

struct EstimateArgs {
  std::string data;
  std::string model = "linear";
  std::string outcome;
  std::vector<std::string> endogenous;
  std::vector<std::string> exogenous;
  std::vector<std::string> instruments;
  bool no_intercept = false;
  std::string cons_ratio = "cons_ratio";
  std::string gross_return = "gross_return";
  std::vector<std::string> tau{"0.5"};
  std::string estimator = "mm";
  std::string bandwidth = "fixed:0.0001";
  std::string cov = "iid";
  std::string hac_kernel = "qs";
  std::string hac_bandwidth = "auto";
  std::uint64_t seed = 1;
  Output output{"sqiv_estimate"};
};

struct PreparedModel {
  std::shared_ptr<const Dataset> data;
  std::shared_ptr<const ResidualModel> model;
  std::shared_ptr<const LinearResidualModel> linear;  // null for the Euler model
  std::vector<std::string> param_names;
};

PreparedModel prepare_model(const EstimateArgs& a, const NamedTable& table) {
  PreparedModel p;
  if (a.model == "linear") {
    ColumnRoles roles;
    roles.outcome = a.outcome;
    roles.endogenous = a.endogenous;
    roles.exogenous = a.exogenous;
    roles.instruments = a.instruments;
    roles.intercept = !a.no_intercept;
    p.data = std::make_shared<const Dataset>(dataset_from_table(table, roles));
    p.linear = linear_model_for_roles(roles);
    p.model = p.linear;
    p.param_names = a.endogenous;
    if (roles.intercept) p.param_names.push_back("(intercept)");
    for (const auto& x : a.exogenous) p.param_names.push_back(x);
  } else if (a.model == "euler") {
    const Index n = table.values.rows();
    Matrix y(n, 2);
    y.col(0) = table.values.col(table.column(a.cons_ratio));
    y.col(1) = table.values.col(table.column(a.gross_return));
    Matrix z(n, 1 + static_cast<Index>(a.instruments.size()));
    z.col(0).setOnes();
    std::vector<std::string> z_names{"(intercept)"};
    for (std::size_t k = 0; k < a.instruments.size(); ++k) {
      z.col(static_cast<Index>(k) + 1) = table.values.col(table.column(a.instruments[k]));
      z_names.push_back(a.instruments[k]);
    }
    p.data = std::make_shared<const Dataset>(y, Matrix::Ones(n, 1), z, std::vector<Index>{0},
                                             std::vector<std::string>{a.cons_ratio, a.gross_return},
                                             std::vector<std::string>{"(intercept)"}, z_names);
    auto m = euler_residual_model(0, 1);
    m->validate(*p.data);
    p.model = m;
    p.param_names = {"beta", "gamma"};
  } else {
    throw ConfigError("model: expected 'linear' or 'euler', got '" + a.model + "'");
  }
  return p;
}

EstimateResult run_estimator(const PreparedModel& p, EstimatorKind kind, double tau, double h,
                             const EstimatorOptions& opts) {
  const Index d_beta = p.model->dim();
  const Index d_z = p.data->Z().cols();
  switch (kind) {
    case EstimatorKind::mm: {
      if (d_z == d_beta) return estimate_mm(MomentContext(p.data, p.model, tau, h), opts);
      if (p.linear && p.linear->endog_cols().size() == 1) {
        auto proj = std::make_shared<const Dataset>(projection_instruments(*p.data, p.linear->endog_cols()[0]));
        return estimate_mm(MomentContext(proj, p.model, tau, h), opts);
      }
      throw ConfigError("estimator: mm needs as many instruments as parameters; use gmm2s or gmmid");
    }
    case EstimatorKind::one_step: {
      const MomentContext ctx(p.data, p.model, tau, h);
      EstimatorOptions o = opts;
      o.compute_covariance = false;
      const Vector start = initial_estimate(ctx, o).beta_hat;
      return estimate_one_step(ctx, start, opts);
    }
    case EstimatorKind::gmm_two_step:
      return estimate_gmm(MomentContext(p.data, p.model, tau, h), Weighting::two_step(), opts);
    case EstimatorKind::gmm_identity:
      return estimate_gmm(MomentContext(p.data, p.model, tau, h), Weighting::identity(), opts);
    case EstimatorKind::qr:
      if (!p.linear) throw ConfigError("estimator: qr needs the linear model");
      return estimate_qr(*p.data, p.linear, tau, h, opts);
    case EstimatorKind::two_sls:
      if (!p.linear) throw ConfigError("estimator: 2sls needs the linear model");
      return estimate_2sls(*p.data, *p.linear, opts.covariance);
    case EstimatorKind::gmm_custom:
      break;
  }
  throw ConfigError("estimator: unsupported kind '" + to_string(kind) + "'");
}

int cmd_estimate(const EstimateArgs& a, int threads, std::ostream& out, std::ostream& err) {
  if (a.data.empty()) throw ConfigError("data: a CSV path is required");
  const std::vector<double> taus = parse_tau_list(a.tau, "tau");
  const EstimatorKind kind = estimator_from(a.estimator, "estimator");
  const BandwidthPolicy policy = bandwidth_from(a.bandwidth, "bandwidth");
  const CovarianceSpec cov = covariance_from(a.cov, a.hac_kernel, a.hac_bandwidth);
  const NamedTable table = read_csv(a.data);
  const PreparedModel p = prepare_model(a, table);

  EstimatorOptions opts;
  opts.covariance = cov;
  opts.seed = a.seed;

  std::vector<EstimateResult> results(taus.size());
  std::vector<std::optional<Error>> failures(taus.size());
  parallel_for(taus.size(), threads, [&](std::size_t k) {
    try {
      const double h = kind == EstimatorKind::two_sls
                           ? 0.0
                           : select_bandwidth(policy, *p.data, *p.model, taus[k]);
      results[k] = run_estimator(p, kind, taus[k], h, opts);
      results[k].tau = taus[k];
    } catch (const Error& e) {
      failures[k] = e;
    }
  });
  for (std::size_t k = 0; k < taus.size(); ++k)
    if (failures[k]) {
      throw Error(failures[k]->kind(), "tau = " + format_sig6(taus[k]) + ": " + failures[k]->what());
    }
  for (const auto& r : results)
    for (const auto& w : r.warnings) err << "warning: tau = " << format_sig6(r.tau) << ": " << w << "\n";

  const Settings settings{
      {"command", "estimate"},
      {"data", a.data},
      {"model", a.model},
      {"outcome", a.outcome},
      {"endogenous", join(a.endogenous)},
      {"exogenous", join(a.exogenous)},
      {"instruments", join(a.instruments)},
      {"intercept", a.no_intercept ? "false" : "true"},
      {"tau", join_numbers(taus)},
      {"estimator", to_string(kind)},
      {"bandwidth", policy.describe()},
      {"covariance", cov.describe()},
      {"seed", std::to_string(a.seed)},
      {"threads", std::to_string(threads)},
  };

  std::string csv = csv_header(settings);
  csv += "tau,estimator,parameter,estimate,std_error,bandwidth,cov_bandwidth,converged,iterations,moment_norm\n";
  json j;
  j["config"] = settings_json(settings);
  j["results"] = json::array();
  for (const auto& r : results) {
    json jr;
    jr["tau"] = num6(r.tau);
    jr["tau_full"] = numfull(r.tau);
    jr["estimator"] = to_string(r.kind);
    jr["bandwidth"] = num6(r.bandwidth_used);
    jr["bandwidth_full"] = numfull(r.bandwidth_used);
    jr["cov_bandwidth"] = num6(r.cov_bandwidth);
    jr["cov_bandwidth_full"] = numfull(r.cov_bandwidth);
    jr["parameters"] = json::array();
    for (Index i = 0; i < r.beta_hat.size(); ++i) {
      const double se = i < r.std_errors.size() ? r.std_errors[i] : std::nan("");
      const std::string& name = p.param_names[static_cast<std::size_t>(i)];
      csv += format_sig6(r.tau) + "," + to_string(r.kind) + "," + csv_field(name) + "," +
             format_sig6(r.beta_hat[i]) + "," + format_sig6(se) + "," + format_sig6(r.bandwidth_used) +
             "," + format_sig6(r.cov_bandwidth) + "," + (r.solver.converged ? "true" : "false") + "," + std::to_string(r.solver.iterations) +
             "," + format_sig6(r.moment_norm) + "\n";
      jr["parameters"].push_back({{"name", name},
                                  {"estimate", num6(r.beta_hat[i])},
                                  {"estimate_full", numfull(r.beta_hat[i])},
                                  {"std_error", num6(se)},
                                  {"std_error_full", numfull(se)}});
    }
    json covj = json::array();
    for (Index i = 0; i < r.cov.rows(); ++i) {
      json row = json::array();
      for (Index c = 0; c < r.cov.cols(); ++c) row.push_back(numfull(r.cov(i, c)));
      covj.push_back(row);
    }
    jr["cov_full"] = covj;
    jr["moment_norm"] = num6(r.moment_norm);
    jr["moment_norm_full"] = numfull(r.moment_norm);
    jr["criterion_full"] = numfull(r.criterion);
    jr["solver"] = {{"converged", r.solver.converged},
                    {"iterations", r.solver.iterations},
                    {"evaluations", r.solver.evaluations},
                    {"final_norm_full", numfull(r.solver.final_norm)},
                    {"message", r.solver.message}};
    jr["warnings"] = r.warnings;
    j["results"].push_back(jr);
  }
  write_all(a.output.files(csv, j), out);
  return exit_ok;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::vector<int> dgp{1};
  std::vector<long> n{200};
  std::vector<std::string> tau{"0.5"};
  long reps = 100;
  std::vector<std::string> estimators{"mm"};
  std::string bandwidth = "default";
  std::string cov = "hac";
  std::string hac_kernel = "qs";
  std::string hac_bandwidth = "auto";
  double rho_z = 0.5;
  double rho_eps = 0.5;
  std::vector<double> delta{0.0, 1.0, 1.0, 1.0, 1.0};
  std::uint64_t seed = 1;
  Output output{"sqiv_simulate"};
};

int cmd_simulate(const SimulateArgs& a, int threads, std::ostream& out) {
  MonteCarloConfig c;
  c.dgps = a.dgp;
  for (int d : c.dgps)
    if (d < 1 || d > 4) throw ConfigError("dgp: design " + std::to_string(d) + " does not exist (1-4)");
  c.ns.clear();
  for (long n : a.n) {
    if (n < 10) throw ConfigError("n: sample size " + std::to_string(n) + " below 10");
    c.ns.push_back(n);
  }
  c.taus = parse_tau_list(a.tau, "tau");
  if (a.reps < 1) throw ConfigError("reps: must be at least 1");
  c.reps = a.reps;
  c.estimators.clear();
  for (const auto& e : a.estimators) c.estimators.push_back(estimator_from(e, "estimators"));
  if (a.bandwidth != "default") c.bandwidth = bandwidth_from(a.bandwidth, "bandwidth");
  c.covariance = covariance_from(a.cov, a.hac_kernel, a.hac_bandwidth);
  if (a.delta.size() != 5) throw ConfigError("delta: expected 5 coefficients");
  c.params.rho_z = a.rho_z;
  c.params.rho_eps = a.rho_eps;
  for (std::size_t k = 0; k < 5; ++k) c.params.delta[k] = a.delta[k];
  c.seed = a.seed;
  c.threads = threads;

  const MonteCarloReport report = run_monte_carlo(c);

  std::vector<std::string> dgps, ns, ests;
  for (int d : c.dgps) dgps.push_back(std::to_string(d));
  for (Index n : c.ns) ns.push_back(std::to_string(n));
  for (auto e : c.estimators) ests.push_back(to_string(e));
  std::vector<double> delta(c.params.delta.begin(), c.params.delta.end());
  const Settings settings{
      {"command", "simulate"},
      {"dgp", join(dgps)},
      {"n", join(ns)},
      {"tau", join_numbers(c.taus)},
      {"reps", std::to_string(c.reps)},
      {"estimators", join(ests)},
      {"bandwidth", c.bandwidth ? c.bandwidth->describe() : "default (fixed:0.0001 for designs 1-3, fixed:0.1 for 4)"},
      {"covariance", c.covariance.describe()},
      {"rho_z", format_full(c.params.rho_z)},
      {"rho_eps", format_full(c.params.rho_eps)},
      {"delta", join_numbers(delta)},
      {"seed", std::to_string(c.seed)},
      {"threads", std::to_string(threads)},
  };

  std::string csv = csv_header(settings);
  csv += "dgp,tau,n,estimator,robust_rmse,median_bias,failures,iqr,replications,truth,bandwidth\n";
  json j;
  j["config"] = settings_json(settings);
  j["cells"] = json::array();
  for (const auto& cell : report.cells) {
    const auto& s = cell.summary;
    csv += std::to_string(cell.dgp) + "," + format_sig6(cell.tau) + "," + std::to_string(cell.n) + "," +
           to_string(cell.estimator) + "," + format_sig6(s.robust_rmse) + "," + format_sig6(s.median_bias) +
           "," + std::to_string(s.failures) + "," + format_sig6(s.iqr) + "," +
           std::to_string(s.replications) + "," + format_sig6(cell.truth) + "," +
           format_sig6(cell.bandwidth) + "\n";
    j["cells"].push_back({{"dgp", cell.dgp},
                          {"tau", num6(cell.tau)},
                          {"tau_full", numfull(cell.tau)},
                          {"n", cell.n},
                          {"estimator", to_string(cell.estimator)},
                          {"robust_rmse", num6(s.robust_rmse)},
                          {"robust_rmse_full", numfull(s.robust_rmse)},
                          {"median_bias", num6(s.median_bias)},
                          {"median_bias_full", numfull(s.median_bias)},
                          {"failures", s.failures},
                          {"iqr", num6(s.iqr)},
                          {"iqr_full", numfull(s.iqr)},
                          {"replications", s.replications},
                          {"truth", num6(cell.truth)},
                          {"bandwidth", num6(cell.bandwidth)},
                          {"bandwidth_full", numfull(cell.bandwidth)}});
  }
  write_all(a.output.files(csv, j), out);
  return exit_ok;
}

// ---------------------------------------------------------------------------
// euler

struct EulerArgs {
  std::string data;
  std::vector<std::string> taus{"0.1..0.9"};
  std::string estimator = "mm";
  std::string hac = "qs";
  std::string hac_bandwidth = "auto";
  std::string bandwidth = "fixed:0.0001";
  int lag = 2;
  bool exogenous_regressor = false;
  std::uint64_t seed = 1;
  Output output{"sqiv_euler"};
};

int cmd_euler(const EulerArgs& a, int threads, std::ostream& out) {
  if (a.data.empty()) throw ConfigError("data: a CSV path is required");
  EulerTableConfig c;
  c.taus = parse_tau_list(a.taus, "taus");
  c.estimator = estimator_from(a.estimator, "estimator");
  if (c.estimator == EstimatorKind::qr || c.estimator == EstimatorKind::two_sls)
    throw ConfigError("estimator: the decile table supports mm, onestep, gmm2s and gmmid");
  c.bandwidth = bandwidth_from(a.bandwidth, "bandwidth");
  c.covariance = covariance_from("hac", a.hac, a.hac_bandwidth);
  if (a.lag < 0) throw ConfigError("lag: must be non-negative");
  c.data.lag = a.lag;
  c.data.exogenous_regressor = a.exogenous_regressor;
  c.seed = a.seed;
  c.threads = threads;

  const MacroSeries series = macro_series_from_table(read_csv(a.data));
  const std::vector<EulerRow> rows = decile_table(series, c);

  const Settings settings{
      {"command", "euler"},
      {"data", a.data},
      {"taus", join_numbers(c.taus)},
      {"estimator", to_string(c.estimator)},
      {"bandwidth", c.bandwidth.describe()},
      {"covariance", c.covariance.describe()},
      {"lag", std::to_string(c.data.lag)},
      {"instruments", c.data.exogenous_regressor ? "regressor" : "lagged series"},
      {"seed", std::to_string(c.seed)},
      {"threads", std::to_string(threads)},
  };

  std::string csv = csv_header(settings);
  csv += "label,tau,estimator,bandwidth,cov_bandwidth,beta,gamma,se_beta,se_gamma,eis,misspecified,ok,message\n";
  json j;
  j["config"] = settings_json(settings);
  j["rows"] = json::array();
  for (const auto& r : rows) {
    const auto& e = r.estimate;
    const double eis = (r.ok && e.gamma != 0.0) ? 1.0 / e.gamma : std::nan("");
    const bool missp = r.ok && e.misspecified;
    csv += csv_field(r.label) + "," + format_sig6(r.tau) + "," + to_string(r.estimator) + "," +
           format_sig6(r.bandwidth) + "," + format_sig6(e.fit.cov_bandwidth) + "," + format_sig6(e.beta) + "," + format_sig6(e.gamma) + "," +
           format_sig6(e.se_beta) + "," + format_sig6(e.se_gamma) + "," + format_sig6(eis) + "," +
           (missp ? "true" : "false") + "," + (r.ok ? "true" : "false") + "," + csv_field(r.message) + "\n";
    j["rows"].push_back({{"label", r.label},
                         {"tau", num6(r.tau)},
                         {"tau_full", numfull(r.tau)},
                         {"estimator", to_string(r.estimator)},
                         {"bandwidth", num6(r.bandwidth)},
                         {"bandwidth_full", numfull(r.bandwidth)},
                         {"cov_bandwidth", num6(e.fit.cov_bandwidth)},
                         {"cov_bandwidth_full", numfull(e.fit.cov_bandwidth)},
                         {"beta", num6(e.beta)},
                         {"beta_full", numfull(e.beta)},
                         {"gamma", num6(e.gamma)},
                         {"gamma_full", numfull(e.gamma)},
                         {"se_beta", num6(e.se_beta)},
                         {"se_beta_full", numfull(e.se_beta)},
                         {"se_gamma", num6(e.se_gamma)},
                         {"se_gamma_full", numfull(e.se_gamma)},
                         {"eis", num6(eis)},
                         {"eis_full", numfull(eis)},
                         {"misspecified", missp},
                         {"ok", r.ok},
                         {"message", r.message}});
  }
  write_all(a.output.files(csv, j), out);
  return exit_ok;
}

// ---------------------------------------------------------------------------

void add_output_flags(CLI::App* sub, Output& o) {
  sub->add_option("--out", o.prefix, "Output path prefix; writes <prefix>.csv and/or <prefix>.json")
      ->capture_default_str();
  sub->add_option("--format", o.format, "csv, json or both")
      ->check(CLI::IsMember({"csv", "json", "both"}))
      ->capture_default_str();
}

void add_covariance_flags(CLI::App* sub, std::string& mode, std::string& kernel, std::string& bw) {
  sub->add_option("--cov", mode, "Long-run variance: iid or hac")->capture_default_str();
  sub->add_option("--hac-kernel", kernel, "HAC kernel: qs or bartlett")->capture_default_str();
  sub->add_option("--hac-bandwidth", bw, "HAC lag bandwidth, or auto for the AR(1) plug-in")
      ->capture_default_str();
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Smoothed MM/GMM estimation for IV quantile regression", "sqiv"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML config file; [estimate], [simulate] and [euler] sections")
      ->envname("SQIV_CONFIG");
  int threads = available_cores();
  app.add_option("--threads", threads, "Worker threads; 1 gives the sequential path")
      ->check(CLI::PositiveNumber);

  EstimateArgs ea;
  auto* est = app.add_subcommand("estimate", "Estimate one model at one or more quantiles");
  est->add_option("--data", ea.data, "Input CSV with a header row")->required();
  est->add_option("--model", ea.model, "linear or euler")->capture_default_str();
  est->add_option("--outcome", ea.outcome, "Outcome column (linear model)");
  est->add_option("--endogenous", ea.endogenous, "Endogenous regressor columns")->delimiter(',');
  est->add_option("--exogenous", ea.exogenous, "Exogenous regressor columns")->delimiter(',');
  est->add_option("--instruments", ea.instruments, "Excluded instrument columns")->delimiter(',');
  est->add_flag("--no-intercept", ea.no_intercept, "Do not add a constant regressor");
  est->add_option("--cons-ratio", ea.cons_ratio, "Consumption ratio column (euler model)")->capture_default_str();
  est->add_option("--gross-return", ea.gross_return, "Gross return column (euler model)")->capture_default_str();
  est->add_option("--tau", ea.tau, "Quantile levels: list or range a..b[:step]")->delimiter(',')->capture_default_str();
  est->add_option("--estimator", ea.estimator, "mm, onestep, gmm2s, gmmid, qr or 2sls")->capture_default_str();
  est->add_option("--bandwidth", ea.bandwidth, "fixed:h, rate:c,e or plugin")->capture_default_str();
  add_covariance_flags(est, ea.cov, ea.hac_kernel, ea.hac_bandwidth);
  est->add_option("--seed", ea.seed, "Annealing seed")->capture_default_str();
  add_output_flags(est, ea.output);

  SimulateArgs sa;
  auto* sim = app.add_subcommand("simulate", "Monte Carlo robust RMSE tables for designs 1-4");
  sim->add_option("--dgp", sa.dgp, "Designs (1-4)")->delimiter(',')->capture_default_str();
  sim->add_option("--n", sa.n, "Sample sizes")->delimiter(',')->capture_default_str();
  sim->add_option("--tau", sa.tau, "Quantile levels")->delimiter(',')->capture_default_str();
  sim->add_option("--reps", sa.reps, "Replications per cell")->capture_default_str();
  sim->add_option("--estimators", sa.estimators, "Estimators")->delimiter(',')->capture_default_str();
  sim->add_option("--bandwidth", sa.bandwidth, "Bandwidth policy, or default")->capture_default_str();
  add_covariance_flags(sim, sa.cov, sa.hac_kernel, sa.hac_bandwidth);
  sim->add_option("--rho-z", sa.rho_z, "Instrument AR coefficient (design 4)")->capture_default_str();
  sim->add_option("--rho-eps", sa.rho_eps, "Error AR coefficient (designs 2-3)")->capture_default_str();
  sim->add_option("--delta", sa.delta, "First-stage coefficients (design 4)")->delimiter(',')->expected(5);
  sim->add_option("--seed", sa.seed, "Master seed")->capture_default_str();
  add_output_flags(sim, sa.output);

  EulerArgs ua;
  auto* eul = app.add_subcommand("euler", "Quantile Euler-equation decile table");
  eul->add_option("--data", ua.data, "Macro series CSV")->required();
  eul->add_option("--taus", ua.taus, "Quantile levels")->delimiter(',')->capture_default_str();
  eul->add_option("--estimator", ua.estimator, "mm, onestep, gmm2s or gmmid")->capture_default_str();
  eul->add_option("--hac", ua.hac, "HAC kernel: qs or bartlett")->capture_default_str();
  eul->add_option("--hac-bandwidth", ua.hac_bandwidth, "HAC lag bandwidth or auto")->capture_default_str();
  eul->add_option("--bandwidth", ua.bandwidth, "Smoothing bandwidth policy")->capture_default_str();
  eul->add_option("--lag", ua.lag, "Instrument lag")->capture_default_str();
  eul->add_flag("--exogenous-regressor", ua.exogenous_regressor, "Instrument with the regressor itself");
  eul->add_option("--seed", ua.seed, "Annealing seed")->capture_default_str();
  add_output_flags(eul, ua.output);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return exit_ok;
  } catch (const CLI::ParseError& e) {
    err << "sqiv: " << e.what() << "\n";
    return exit_config;
  }

  try {
    if (est->parsed()) return cmd_estimate(ea, threads, out, err);
    if (sim->parsed()) return cmd_simulate(sa, threads, out);
    if (eul->parsed()) return cmd_euler(ua, threads, out);
  } catch (const Error& e) {
    err << "sqiv: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "sqiv: internal error: " << e.what() << "\n";
    return exit_internal;
  }
  return exit_config;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"sqiv"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace sqiv
