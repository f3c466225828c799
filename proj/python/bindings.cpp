#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "sqiv/bandwidth.hpp"
#include "sqiv/cli.hpp"
#include "sqiv/estimators.hpp"
#include "sqiv/euler.hpp"
#include "sqiv/kernel.hpp"
#include "sqiv/moments.hpp"
#include "sqiv/rng.hpp"
#include "sqiv/simulation.hpp"

namespace py = pybind11;
using namespace sqiv;

namespace {

py::dict result_dict(const EstimateResult& r) {
  py::dict d;
  d["beta_hat"] = r.beta_hat;
  d["cov"] = r.cov;
  d["std_errors"] = r.std_errors;
  d["tau"] = r.tau;
  d["bandwidth"] = r.bandwidth_used;
  d["cov_bandwidth"] = r.cov_bandwidth;
  d["estimator"] = to_string(r.kind);
  d["converged"] = r.solver.converged;
  d["iterations"] = r.solver.iterations;
  d["message"] = r.solver.message;
  d["moment_norm"] = r.moment_norm;
  d["criterion"] = r.criterion;
  d["warnings"] = r.warnings;
  return d;
}

std::shared_ptr<const Dataset> make_dataset(const Matrix& y, const Matrix& x, const Matrix& z,
                                            const std::vector<Index>& x_in_z) {
  return std::make_shared<const Dataset>(y, x, z, x_in_z);
}

/// Linear model Λ = y0 - y[1:]·β_endog - x·β_exog on (Y, X, Z).
std::shared_ptr<const LinearResidualModel> linear_for(const Matrix& y, const Matrix& x) {
  std::vector<Index> endog, exog;
  for (Index j = 1; j < y.cols(); ++j) endog.push_back(j);
  for (Index j = 0; j < x.cols(); ++j) exog.push_back(j);
  return linear_residual_model(0, endog, exog);
}

EstimatorOptions options_for(const std::string& cov, const std::string& hac_kernel, std::uint64_t seed,
                             const std::optional<Vector>& initial) {
  EstimatorOptions o;
  o.covariance = parse_covariance(cov, hac_kernel, "auto");
  o.seed = seed;
  o.initial = initial;
  return o;
}

py::dict dataset_dict(const Dataset& d) {
  py::dict out;
  out["Y"] = d.Y();
  out["X"] = d.X();
  out["Z"] = d.Z();
  out["x_in_z"] = d.x_in_z();
  return out;
}

MacroSeries series_from(const py::dict& s) {
  MacroSeries m;
  m.time = s["time"].cast<std::vector<double>>();
  m.cons_growth = s["cons_growth"].cast<std::vector<double>>();
  m.real_rate = s["real_rate"].cast<std::vector<double>>();
  m.nominal_rate = s["nominal_rate"].cast<std::vector<double>>();
  m.inflation = s["inflation"].cast<std::vector<double>>();
  m.log_dp = s["log_dp"].cast<std::vector<double>>();
  return m;
}

py::dict euler_dict(const EulerEstimate& e) {
  py::dict d;
  d["beta"] = e.beta;
  d["gamma"] = e.gamma;
  d["se_beta"] = e.se_beta;
  d["se_gamma"] = e.se_gamma;
  d["slope"] = e.slope;
  d["intercept"] = e.intercept;
  d["misspecified"] = e.misspecified;
  d["fit"] = result_dict(e.fit);
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Smoothed MM/GMM estimation for instrumental-variables quantile models";

  auto base_error = py::register_exception<Error>(m, "SqivError", PyExc_RuntimeError);
  py::register_exception<SolverError>(m, "SolverError", base_error.ptr());

  m.def("smoothed_indicator", py::vectorize([](double u) { return smoothed_indicator(u); }),
        py::arg("u"), "Fourth-order smoothed indicator evaluated elementwise.");
  m.def("smoothed_indicator_deriv", py::vectorize([](double u) { return smoothed_indicator_deriv(u); }),
        py::arg("u"));
  m.def("kernel_moment", &kernel_moment, py::arg("k"), "Integral of u^k times the kernel derivative.");

  m.def(
      "smoothed_moments",
      [](const Matrix& y, const Matrix& x, const Matrix& z, const std::vector<Index>& x_in_z,
         const Vector& beta, double tau, double h, bool jacobian) -> py::tuple {
        auto data = make_dataset(y, x, z, x_in_z);
        const MomentContext ctx(data, linear_for(y, x), tau, h);
        if (!jacobian) return py::make_tuple(smoothed_moments(ctx, beta), py::none());
        return py::make_tuple(smoothed_moments(ctx, beta), moment_jacobian(ctx, beta));
      },
      py::arg("Y"), py::arg("X"), py::arg("Z"), py::arg("x_in_z"), py::arg("beta"), py::arg("tau"),
      py::arg("h"), py::arg("jacobian") = false,
      "Smoothed moments (and optionally their Jacobian) of the linear model.");

  m.def(
      "estimate_linear",
      [](const Matrix& y, const Matrix& x, const Matrix& z, const std::vector<Index>& x_in_z, double tau,
         const std::string& estimator, double h, const std::string& cov, const std::string& hac_kernel,
         std::uint64_t seed, std::optional<Vector> initial) {
        auto data = make_dataset(y, x, z, x_in_z);
        auto model = linear_for(y, x);
        const EstimatorOptions o = options_for(cov, hac_kernel, seed, initial);
        const MomentContext ctx(data, model, tau, h);
        EstimateResult r;
        {
          py::gil_scoped_release release;
          switch (parse_estimator(estimator)) {
            case EstimatorKind::mm:
              if (z.cols() != model->dim() && y.cols() == 2)
                r = estimate_mm(MomentContext(std::make_shared<const Dataset>(projection_instruments(*data, 1)),
                                              model, tau, h),
                                o);
              else
                r = estimate_mm(ctx, o);
              break;
            case EstimatorKind::one_step: {
              EstimatorOptions io = o;
              io.compute_covariance = false;
              r = estimate_one_step(ctx, initial_estimate(ctx, io).beta_hat, o);
              break;
            }
            case EstimatorKind::gmm_two_step:
              r = estimate_gmm(ctx, Weighting::two_step(), o);
              break;
            case EstimatorKind::gmm_identity:
              r = estimate_gmm(ctx, Weighting::identity(), o);
              break;
            case EstimatorKind::qr:
              r = estimate_qr(*data, model, tau, h, o);
              break;
            case EstimatorKind::two_sls:
              r = estimate_2sls(*data, *model, o.covariance);
              break;
            default:
              throw InvalidArgument("unsupported estimator '" + estimator + "'");
          }
        }
        return result_dict(r);
      },
      py::arg("Y"), py::arg("X"), py::arg("Z"), py::arg("x_in_z"), py::arg("tau"),
      py::arg("estimator") = "mm", py::arg("h") = 1e-4, py::arg("cov") = "iid",
      py::arg("hac_kernel") = "qs", py::arg("seed") = 0, py::arg("initial") = py::none(),
      "Estimate the linear model y = Y[:,1:]·b + X·c at quantile tau. Coefficients are ordered\n"
      "endogenous first, then exogenous.");

  m.def(
      "gen_dgp",
      [](int id, Index n, std::uint64_t seed, std::uint32_t rep) {
        return dataset_dict(generate_dgp(id, n, seed, stream_id(static_cast<std::uint32_t>(id),
                                                                static_cast<std::uint32_t>(n), rep)));
      },
      py::arg("dgp"), py::arg("n"), py::arg("seed"), py::arg("rep") = 0,
      "Draw one sample from simulation design 1-4 as a dict of arrays.");
  m.def("dgp_truth", &dgp_truth, py::arg("dgp"), py::arg("tau"));

  m.def(
      "robust_rmse",
      [](const std::vector<double>& estimates, double truth) {
        const RobustSummary s = robust_rmse(estimates, truth);
        py::dict d;
        d["robust_rmse"] = s.robust_rmse;
        d["median_bias"] = s.median_bias;
        d["iqr"] = s.iqr;
        d["replications"] = s.replications;
        d["failures"] = s.failures;
        return d;
      },
      py::arg("estimates"), py::arg("truth"));

  m.def(
      "run_monte_carlo",
      [](std::vector<int> dgps, std::vector<Index> ns, std::vector<double> taus,
         std::vector<std::string> estimators, Index reps, std::uint64_t seed, std::optional<double> h,
         int threads) {
        MonteCarloConfig c;
        c.dgps = std::move(dgps);
        c.ns = std::move(ns);
        c.taus = std::move(taus);
        c.estimators.clear();
        for (const auto& e : estimators) c.estimators.push_back(parse_estimator(e));
        c.reps = reps;
        c.seed = seed;
        if (h) c.bandwidth = BandwidthPolicy::fixed(*h);
        c.threads = threads;
        MonteCarloReport report;
        {
          py::gil_scoped_release release;
          report = run_monte_carlo(c);
        }
        py::list cells;
        for (const auto& cell : report.cells) {
          py::dict d;
          d["dgp"] = cell.dgp;
          d["tau"] = cell.tau;
          d["n"] = cell.n;
          d["estimator"] = to_string(cell.estimator);
          d["truth"] = cell.truth;
          d["bandwidth"] = cell.bandwidth;
          d["robust_rmse"] = cell.summary.robust_rmse;
          d["median_bias"] = cell.summary.median_bias;
          d["failures"] = cell.summary.failures;
          d["estimates"] = cell.estimates;
          cells.append(d);
        }
        return cells;
      },
      py::arg("dgps"), py::arg("ns"), py::arg("taus"), py::arg("estimators"), py::arg("reps"),
      py::arg("seed") = 1, py::arg("h") = py::none(), py::arg("threads") = 1,
      "Monte Carlo robust RMSE cells; h=None uses each design's default bandwidth.");

  m.def(
      "synthetic_macro_series",
      [](Index n, double beta, double gamma, double noise_sd, std::uint64_t seed) {
        const MacroSeries s = synthetic_macro_series(n, beta, gamma, noise_sd, seed);
        py::dict d;
        d["time"] = s.time;
        d["cons_growth"] = s.cons_growth;
        d["real_rate"] = s.real_rate;
        d["nominal_rate"] = s.nominal_rate;
        d["inflation"] = s.inflation;
        d["log_dp"] = s.log_dp;
        return d;
      },
      py::arg("n"), py::arg("beta") = 0.99, py::arg("gamma") = 5.0, py::arg("noise_sd") = 0.001,
      py::arg("seed") = 1);

  m.def(
      "decile_table",
      [](const py::dict& series, std::vector<double> taus, const std::string& estimator, double h,
         int threads) {
        EulerTableConfig c;
        c.taus = std::move(taus);
        c.estimator = parse_estimator(estimator);
        c.bandwidth = BandwidthPolicy::fixed(h);
        c.threads = threads;
        const MacroSeries s = series_from(series);
        std::vector<EulerRow> rows;
        {
          py::gil_scoped_release release;
          rows = decile_table(s, c);
        }
        py::list out;
        for (const auto& r : rows) {
          py::dict d = euler_dict(r.estimate);
          d["label"] = r.label;
          d["tau"] = r.tau;
          d["ok"] = r.ok;
          d["message"] = r.message;
          out.append(d);
        }
        return out;
      },
      py::arg("series"), py::arg("taus") = std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9},
      py::arg("estimator") = "mm", py::arg("h") = 1e-4, py::arg("threads") = 1,
      "Per-quantile (beta, gamma) rows plus a 2SLS row.");

  m.def(
      "estimate_euler",
      [](const Matrix& y, const Matrix& z, double tau, const std::string& route, const std::string& estimator,
         double h) {
        const Index n = y.rows();
        const Dataset logs(y, Matrix::Ones(n, 1), z, {0});
        const EstimatorKind kind = parse_estimator(estimator);
        if (route == "loglinear") return euler_dict(estimate_euler_loglinear(logs, tau, kind, h));
        if (route == "nonlinear")
          return euler_dict(estimate_euler_nonlinear(levels_dataset(logs), tau, kind, h));
        throw InvalidArgument("route must be 'loglinear' or 'nonlinear'");
      },
      py::arg("Y"), py::arg("Z"), py::arg("tau"), py::arg("route") = "loglinear",
      py::arg("estimator") = "mm", py::arg("h") = 1e-4,
      "Euler parameters from Y = (log consumption growth, log real return) and instruments Z\n"
      "whose first column is the constant.");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run the command-line tool in-process; returns (exit_code, stdout, stderr).");
}
