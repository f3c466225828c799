#include "sqiv/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <utility>
#include <sstream>

#include "sqiv/error.hpp"

namespace sqiv {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

std::string to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::mm: return "mm";
    case EstimatorKind::one_step: return "onestep";
    case EstimatorKind::gmm_two_step: return "gmm2s";
    case EstimatorKind::gmm_identity: return "gmmid";
    case EstimatorKind::gmm_custom: return "gmmw";
    case EstimatorKind::qr: return "qr";
    case EstimatorKind::two_sls: return "2sls";
  }
  return "unknown";
}

EstimatorKind parse_estimator(const std::string& name) {
  if (name == "mm") return EstimatorKind::mm;
  if (name == "onestep" || name == "one_step") return EstimatorKind::one_step;
  if (name == "gmm2s" || name == "gmm") return EstimatorKind::gmm_two_step;
  if (name == "gmmid") return EstimatorKind::gmm_identity;
  if (name == "qr") return EstimatorKind::qr;
  if (name == "2sls" || name == "iv") return EstimatorKind::two_sls;
  throw ConfigError("unknown estimator '" + name + "'");
}

namespace {

double moment_tolerance(const MomentContext& ctx, const EstimatorOptions& opts) {
  return opts.moment_tol > 0.0 ? opts.moment_tol : 1e-8 * static_cast<double>(ctx.dim_z());
}

void finish_std_errors(EstimateResult& r) {
  if (r.cov.size() == 0) {
    r.std_errors = Vector::Constant(r.beta_hat.size(), kNaN);
    return;
  }
  r.std_errors = r.cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  for (Index k = 0; k < r.cov.rows(); ++k)
    if (!std::isfinite(r.cov(k, k))) r.std_errors[k] = kNaN;
}

/// Σ̂ for covariance formulas: τ(1-τ)E[ZZᵀ] with iid data, HAC of g_ni otherwise.
Matrix long_run_variance(const MomentContext& ctx, const Vector& beta, const CovarianceSpec& spec) {
  if (spec.mode == CovarianceMode::iid) return sigma_iid_quantile(*ctx.data, ctx.tau);
  return omega_hac(ctx, beta, spec);
}

/// Bandwidth for the Jacobian inside the covariance. The kernel estimate of G
/// needs h·sqrt(n) → ∞, which a tiny estimation bandwidth violates, so the
/// default is the larger of h and a Silverman-type scale of the residuals.
double covariance_bandwidth(const MomentContext& ctx, const Vector& beta, const EstimatorOptions& opts) {
  if (opts.cov_bandwidth) return *opts.cov_bandwidth;
  Vector r = ctx.model->residuals(*ctx.data, beta);
  const double n = static_cast<double>(r.size());
  const double mean = r.mean();
  const double sd = std::sqrt((r.array() - mean).square().sum() / std::max(1.0, n - 1.0));
  std::sort(r.data(), r.data() + r.size());
  const double iqr = (sorted_quantile(r, 0.75) - sorted_quantile(r, 0.25)) / 1.349;
  double scale = iqr > 0.0 ? std::min(sd, iqr) : sd;
  if (!(scale > 0.0) || !std::isfinite(scale)) return ctx.h;
  return std::max(ctx.h, 1.06 * scale * std::pow(n, -0.2));
}

Matrix covariance_jacobian(const MomentContext& ctx, const Vector& beta, const EstimatorOptions& opts,
                           EstimateResult& r) {
  r.cov_bandwidth = covariance_bandwidth(ctx, beta, opts);
  return moment_jacobian(ctx.with_bandwidth(r.cov_bandwidth), beta);
}

template <class F>
void guarded_covariance(EstimateResult& r, F&& compute) {
  try {
    r.cov = compute();
  } catch (const Error& e) {
    r.cov = Matrix::Constant(r.beta_hat.size(), r.beta_hat.size(), kNaN);
    r.warnings.push_back(std::string("covariance unavailable: ") + e.what());
  }
  finish_std_errors(r);
}

/// Jacobian of M̂ at h, widening the bandwidth until it is well conditioned.
/// Far below the observation spacing the exact Jacobian is zero almost
/// everywhere; the widened one still points toward the root.
Matrix widened_jacobian(const MomentContext& ctx, const Vector& beta, double rcond) {
  Matrix j;
  double h = ctx.h;
  for (int k = 0; k <= 16; ++k, h *= 2.0) {
    j = moment_jacobian(ctx.with_bandwidth(h), beta);
    if (!j.allFinite()) break;
    Eigen::JacobiSVD<Matrix> svd(j);
    const Vector& sv = svd.singularValues();
    if (sv.size() > 0 && sv[0] > 0.0 && sv[sv.size() - 1] >= rcond * sv[0]) return j;
  }
  return j;
}

/// Newton at ctx.h. With kappa > 0 each step is shortened so that no
/// residual moves by more than kappa bandwidths.
NewtonResult newton_at(const MomentContext& ctx, const Vector& x0, const NewtonOptions& base,
                       double kappa) {
  NewtonOptions opt = base;
  const double rcond = opt.singular_rcond;
  if (kappa > 0.0) {
    opt.max_step = [&ctx, kappa](const Vector& x, const Vector& dx) {
      const double m = (ctx.model->gradients(*ctx.data, x) * dx).cwiseAbs().maxCoeff();
      return m > 0.0 ? kappa * ctx.h / m : 1.0;
    };
  }
  return newton_root([&](const Vector& b) { return smoothed_moments(ctx, b); },
                     [&](const Vector& b) { return widened_jacobian(ctx, b, 1e3 * rcond); }, x0,
                     ctx.model->box(), opt);
}

struct RootOutcome {
  Vector x;
  SolverReport report;
  int stages = 0;
  Vector fold_point;  // last point on the continuation path
};

void absorb(SolverReport& total, const SolverReport& stage) {
  total.iterations += stage.iterations;
  total.evaluations += stage.evaluations;
}

double residual_scale(const MomentContext& ctx, const Vector& x) {
  Vector r = ctx.model->residuals(*ctx.data, x);
  std::sort(r.data(), r.data() + r.size());
  const double iqr = (sorted_quantile(r, 0.75) - sorted_quantile(r, 0.25)) / 1.349;
  return iqr > 0.0 ? iqr : std::max(r.cwiseAbs().maxCoeff(), 1.0);
}

/// Predictor-corrector continuation in the bandwidth. Once the set of
/// observations inside the kernel window stops changing, the root of a
/// linear model is affine in h, so secant extrapolation between the last two
/// stages predicts the next root; Newton corrects with steps capped at a few
/// bandwidths. The bandwidth ratio shrinks after easy stages and relaxes
/// toward one after failed ones.
RootOutcome continuation(const MomentContext& ctx, const Vector& x0, const NewtonOptions& nopt,
                         RootOutcome out) {
  constexpr double kappa = 2.0;
  constexpr int max_stages = 400;
  const Box& box = ctx.model->box();
  NewtonOptions stage_opt = nopt;
  stage_opt.tol = std::max(nopt.tol, 1e-10);

  double hc = std::max(residual_scale(ctx, x0), 2.0 * ctx.h);
  Vector xc = x0;
  bool anchored = false;
  for (int k = 0; k < 8 && !anchored; ++k, hc *= 2.0) {
    const NewtonResult first = newton_at(ctx.with_bandwidth(hc), xc, stage_opt, 0.0);
    absorb(out.report, first.report);
    ++out.stages;
    if (first.report.converged) {
      xc = first.x;
      anchored = true;
      break;
    }
  }
  out.fold_point = xc;
  if (!anchored) return out;

  std::optional<std::pair<double, Vector>> prev;
  double ratio = 0.5;
  while (out.stages < max_stages) {
    const double hn = std::max(ctx.h, hc * ratio);
    const bool last = hn <= ctx.h;
    const MomentContext sctx = last ? ctx : ctx.with_bandwidth(hn);
    const NewtonOptions& o = last ? nopt : stage_opt;
    NewtonResult res;
    bool ok = false;
    if (prev) {
      const Vector pred = box.project(xc + (hn - hc) / (hc - prev->first) * (xc - prev->second));
      res = newton_at(sctx, pred, o, kappa);
      absorb(out.report, res.report);
      ok = res.report.converged;
    }
    if (!ok) {
      res = newton_at(sctx, xc, o, kappa);
      absorb(out.report, res.report);
      ok = res.report.converged;
    }
    ++out.stages;
    if (!ok) {
      if (last && res.report.final_norm < out.report.final_norm) {
        out.x = res.x;
        out.report.final_norm = res.report.final_norm;
        out.report.message = res.report.message;
      }
      ratio = std::sqrt(ratio);
      if (ratio > 0.999) break;
      continue;
    }
    prev.emplace(hc, xc);
    hc = hn;
    xc = res.x;
    out.fold_point = xc;
    if (last) {
      out.x = xc;
      out.report.converged = true;
      out.report.final_norm = res.report.final_norm;
      out.report.singular_jacobian = false;
      out.report.message = "converged by bandwidth continuation";
      return out;
    }
    if (res.report.iterations <= 1) ratio = std::max(ratio * ratio, 1e-3);
  }
  return out;
}

/// Half-width of the interval around 0 on which the kernel's Ĩ is increasing.
double monotone_half_width(const SmoothKernel& k) {
  if (k.derivative(1.0 - 1e-12) > 0.0 || k.derivative(0.999) >= 0.0) {
    bool monotone = true;
    for (int i = 1; i < 1000 && monotone; ++i) monotone = k.derivative(i / 1000.0) >= 0.0;
    if (monotone) return 1.0;
  }
  double lo = 0.0, hi = 1.0;
  for (int i = 1; i <= 1000; ++i)
    if (k.derivative(i / 1000.0) < 0.0) {
      hi = i / 1000.0;
      lo = (i - 1) / 1000.0;
      break;
    }
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (k.derivative(mid) > 0.0 ? lo : hi) = mid;
  }
  return lo;
}

/// u in the increasing branch with Ĩ(u) = f.
double inverse_indicator(const SmoothKernel& k, double f, double half_width) {
  double lo = -half_width, hi = half_width;
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    (k.indicator(mid) < f ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Solve Λ_i(β) = target_i for the observations in `active` (|active| = d_β).
std::optional<Vector> solve_active(const MomentContext& ctx, const std::vector<Index>& active,
                                   const Vector& target, Vector beta) {
  const Index d = ctx.dim_beta();
  const Dataset& data = *ctx.data;
  const Box& box = ctx.model->box();
  Vector r(d);
  Matrix g(d, d);
  for (int it = 0; it < 30; ++it) {
    for (Index a = 0; a < d; ++a) {
      const Index i = active[static_cast<std::size_t>(a)];
      r[a] = ctx.model->evaluate(data.Y().row(i), data.X().row(i), beta) - target[a];
      g.row(a) = ctx.model->gradient(data.Y().row(i), data.X().row(i), beta).transpose();
    }
    if (!r.allFinite() || !g.allFinite()) return std::nullopt;
    const double scale = 1.0 + target.cwiseAbs().maxCoeff();
    if (r.cwiseAbs().maxCoeff() <= 1e-13 * scale) return beta;
    Eigen::FullPivLU<Matrix> lu(g);
    lu.setThreshold(1e-10);
    if (!lu.isInvertible()) return std::nullopt;
    beta -= lu.solve(r);
    if (!beta.allFinite() || !box.contains(beta)) return std::nullopt;
  }
  return std::nullopt;
}

/// Root search for very small bandwidths. At such h a root of M̂ places d_β
/// observations inside their kernel windows at fractional Ĩ values while
/// every other observation contributes 0 or 1. Candidate active sets are
/// drawn from the observations closest to zero residual at `x`; for each,
/// the fractions follow from a d_Z×d_Z linear system, Ĩ is inverted on its
/// increasing branch, and Newton polishes the result.
std::optional<NewtonResult> vertex_solve(const MomentContext& ctx, const Vector& x,
                                         const NewtonOptions& nopt) {
  const Index d = ctx.dim_beta();
  const Index n = ctx.data->n();
  if (ctx.dim_z() != d || n < d) return std::nullopt;
  const Vector r = ctx.model->residuals(*ctx.data, x);
  const Matrix grads = ctx.model->gradients(*ctx.data, x);
  // Largest candidate pool whose d-subsets number at most kMaxSubsets.
  constexpr double kMaxSubsets = 2000.0;
  Index pool = d;
  while (pool < n) {
    double subsets = 1.0;
    for (Index a = 0; a < d; ++a) subsets = subsets * static_cast<double>(pool + 1 - a) / static_cast<double>(a + 1);
    if (subsets > kMaxSubsets) break;
    ++pool;
  }

  // Rank by distance to the hyperplane Λ_i = 0. When the gradients take only
  // a few distinct directions (discrete regressors), draw the pool evenly
  // from each direction so one dense group cannot crowd out the others.
  std::map<std::vector<double>, std::vector<std::pair<double, Index>>> groups;
  for (Index i = 0; i < n; ++i) {
    const double gn = grads.row(i).norm();
    if (!(gn > 0.0) || !std::isfinite(r[i])) continue;
    std::vector<double> key(static_cast<std::size_t>(d));
    for (Index a = 0; a < d; ++a) key[static_cast<std::size_t>(a)] = std::round(grads(i, a) / gn * 1e9);
    groups[key].emplace_back(std::abs(r[i]) / gn, i);
  }
  std::vector<std::pair<double, Index>> dist;
  if (groups.size() <= static_cast<std::size_t>(4 * d)) {
    const std::size_t share = std::max<std::size_t>(1, static_cast<std::size_t>(pool) / std::max<std::size_t>(1, groups.size()));
    for (auto& [key, members] : groups) {
      const std::size_t take = std::min(share, members.size());
      std::partial_sort(members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take), members.end());
      dist.insert(dist.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
    }
  } else {
    for (auto& [key, members] : groups) dist.insert(dist.end(), members.begin(), members.end());
    const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(pool), dist.size());
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(take), dist.end());
    dist.resize(take);
  }
  std::sort(dist.begin(), dist.end());
  pool = static_cast<Index>(dist.size());
  if (pool < d) return std::nullopt;

  const SmoothKernel& kern = *ctx.kernel;
  const double half = monotone_half_width(kern);
  const double f_low = kern.indicator(-half), f_high = kern.indicator(half);
  const Matrix& z = ctx.data->Z();
  const Vector zsum = z.colwise().sum().transpose();

  std::vector<int> pick(static_cast<std::size_t>(d));
  for (Index a = 0; a < d; ++a) pick[static_cast<std::size_t>(a)] = static_cast<int>(a);
  std::optional<NewtonResult> best;
  double best_dist = std::numeric_limits<double>::infinity();
  int tried = 0;
  while (tried++ < 4 * static_cast<int>(kMaxSubsets)) {
    std::vector<Index> active(static_cast<std::size_t>(d));
    for (Index a = 0; a < d; ++a)
      active[static_cast<std::size_t>(a)] = dist[static_cast<std::size_t>(pick[static_cast<std::size_t>(a)])].second;
    if (auto at_zero = solve_active(ctx, active, Vector::Zero(d), x)) {
      // Fractions f_A solving Σ_{i∈A} Z_i f_i = nτ Z̄ - Σ_{i∉A} Z_i Ĩ(-Λ_i/h).
      const Vector res = ctx.model->residuals(*ctx.data, *at_zero);
      Vector rhs = ctx.tau * zsum;
      Matrix za(d, d);
      std::vector<bool> in_a(static_cast<std::size_t>(n), false);
      for (Index a = 0; a < d; ++a) {
        const Index i = active[static_cast<std::size_t>(a)];
        in_a[static_cast<std::size_t>(i)] = true;
        za.col(a) = z.row(i).transpose();
      }
      for (Index i = 0; i < n; ++i)
        if (!in_a[static_cast<std::size_t>(i)]) rhs -= z.row(i).transpose() * kern.indicator(kernel_argument(res[i], ctx.h));
      Eigen::FullPivLU<Matrix> lu(za);
      lu.setThreshold(1e-10);
      if (lu.isInvertible()) {
        const Vector f = lu.solve(rhs);
        if ((f.array() >= f_low).all() && (f.array() <= f_high).all()) {
          Vector target(d);
          for (Index a = 0; a < d; ++a) target[a] = -ctx.h * inverse_indicator(kern, f[a], half);
          if (auto beta = solve_active(ctx, active, target, *at_zero)) {
            NewtonResult nr = newton_at(ctx, *beta, nopt, 0.0);
            const double moved = (nr.x - x).norm();
            if (nr.report.converged && moved < best_dist) {
              best_dist = moved;
              best = std::move(nr);
            }
          }
        }
      }
    }
    // Next combination of d indices from [0, pool).
    Index a = d - 1;
    while (a >= 0 && pick[static_cast<std::size_t>(a)] == static_cast<int>(pool - d + a)) --a;
    if (a < 0) break;
    ++pick[static_cast<std::size_t>(a)];
    for (Index b = a + 1; b < d; ++b)
      pick[static_cast<std::size_t>(b)] = pick[static_cast<std::size_t>(b - 1)] + 1;
  }
  return best;
}

RootOutcome solve_mm_root(const MomentContext& ctx, const Vector& x0, const EstimatorOptions& opts) {
  NewtonOptions nopt = opts.newton;
  nopt.tol = moment_tolerance(ctx, opts);
  RootOutcome out;
  const NewtonResult direct = newton_at(ctx, x0, nopt, 0.0);
  out.x = direct.x;
  out.report = direct.report;
  out.stages = 1;
  if (direct.report.converged || !opts.continuation) return out;
  const Vector start = ctx.model->box().project(x0);

  // The higher-order kernel makes M̂ non-monotone in the residuals, so its
  // root path in h can fold. Track the path with a monotone kernel instead;
  // at small h both kernels share the root's active observations and their
  // fractional Ĩ values, so Newton or the active-set search finishes the job.
  std::vector<Vector> seeds;
  const bool monotone = monotone_half_width(*ctx.kernel) >= 1.0;
  if (!monotone) {
    MomentContext mctx = ctx;
    mctx.kernel = epanechnikov_kernel();
    RootOutcome m = continuation(mctx, start, nopt, out);
    out.report.iterations = m.report.iterations;
    out.report.evaluations = m.report.evaluations;
    out.stages = m.stages;
    seeds.push_back(m.report.converged ? m.x : m.fold_point);
  }
  {
    RootOutcome c = continuation(ctx, start, nopt, out);
    if (c.report.converged) return c;
    out.report.iterations = c.report.iterations;
    out.report.evaluations = c.report.evaluations;
    out.stages = c.stages;
    if (c.report.final_norm < out.report.final_norm) {
      out.report.final_norm = c.report.final_norm;
      out.report.message = c.report.message;
    }
    seeds.push_back(c.fold_point);
  }
  for (const Vector& seed : seeds) {
    if (seed.size() == 0) continue;
    NewtonResult nr = newton_at(ctx, seed, nopt, 0.0);
    absorb(out.report, nr.report);
    std::optional<NewtonResult> found;
    if (nr.report.converged) found = std::move(nr);
    else found = vertex_solve(ctx, seed, nopt);
    if (found) {
      absorb(out.report, found->report);
      out.x = found->x;
      out.report.converged = true;
      out.report.final_norm = found->report.final_norm;
      out.report.singular_jacobian = false;
      out.report.message = "converged by bandwidth continuation";
      return out;
    }
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

EstimateResult estimate_mm(const MomentContext& ctx, const EstimatorOptions& opts) {
  if (ctx.dim_z() != ctx.dim_beta())
    throw InvalidArgument("MM needs exact identification (d_Z = " + std::to_string(ctx.dim_z()) +
                          ", d_beta = " + std::to_string(ctx.dim_beta()) + ")");
  const Vector x0 = ctx.model->box().project(opts.initial ? *opts.initial
                                                          : ctx.model->initial_guess(*ctx.data));
  const RootOutcome root = solve_mm_root(ctx, x0, opts);
  if (!root.report.converged) {
    std::ostringstream msg;
    msg << "MM failed to solve the smoothed moment equations at h = " << ctx.h
        << " after " << root.stages << " continuation stages: " << root.report.message
        << " (best |M| = " << root.report.final_norm << ", tolerance "
        << moment_tolerance(ctx, opts) << ")";
    throw SolverError(msg.str());
  }
  EstimateResult r;
  r.kind = EstimatorKind::mm;
  r.beta_hat = root.x;
  r.tau = ctx.tau;
  r.bandwidth_used = ctx.h;
  r.solver = root.report;
  r.moment_norm = root.report.final_norm;
  if (opts.compute_covariance) {
    guarded_covariance(r, [&] {
      const Matrix g = covariance_jacobian(ctx, r.beta_hat, opts, r);
      return asym_cov_mm(g, long_run_variance(ctx, r.beta_hat, opts.covariance), ctx.data->n(),
                         opts.covariance.rel_eigen_floor);
    });
  } else {
    finish_std_errors(r);
  }
  return r;
}

EstimateResult estimate_one_step(const MomentContext& ctx, const Vector& beta_bar,
                                 const EstimatorOptions& opts) {
  if (beta_bar.size() != ctx.dim_beta() || !beta_bar.allFinite())
    throw InvalidArgument("one-step: initial estimate must be finite with length d_beta");
  if (!ctx.model->box().contains(beta_bar)) throw InvalidArgument("one-step: initial estimate outside box");
  const MomentEval ev = evaluate_moments(ctx, beta_bar, true);
  const Matrix omega_bar = opts.covariance.mode == CovarianceMode::iid
                               ? symmetrize(lag_autocovariance(ev.contributions, 0))
                               : hac_from_contributions(ev.contributions, opts.covariance);
  const Matrix w = floored_spd_inverse(omega_bar, opts.covariance.rel_eigen_floor);
  const Matrix& g = ev.jacobian;
  const Matrix a = g.transpose() * w * g;
  Eigen::FullPivLU<Matrix> lu(a);
  lu.setThreshold(1e-12);
  if (!lu.isInvertible()) throw IdentificationError("one-step: G' Omega^-1 G is singular");
  const Vector step = lu.solve(g.transpose() * w * ev.moments);

  EstimateResult r;
  r.kind = EstimatorKind::one_step;
  r.tau = ctx.tau;
  r.bandwidth_used = ctx.h;
  r.beta_hat = beta_bar - step;
  if (!ctx.model->box().contains(r.beta_hat)) {
    r.warnings.emplace_back("one-step estimate left the parameter box and was projected");
    r.beta_hat = ctx.model->box().project(r.beta_hat);
  }
  r.solver.converged = true;
  r.solver.iterations = 1;
  r.solver.evaluations = 1;
  r.solver.message = "one step";
  r.moment_norm = smoothed_moments(ctx, r.beta_hat).norm();
  r.solver.final_norm = r.moment_norm;
  if (opts.compute_covariance) {
    guarded_covariance(r, [&] {
      return asym_cov_mm(covariance_jacobian(ctx, r.beta_hat, opts, r), omega_bar, ctx.data->n(),
                         opts.covariance.rel_eigen_floor);
    });
  } else {
    finish_std_errors(r);
  }
  return r;
}

Dataset projection_instruments(const Dataset& data, Index endog_col) {
  if (endog_col < 0 || endog_col >= data.Y().cols())
    throw InvalidArgument("projection: endogenous column out of range");
  const Matrix& z = data.Z();
  bool has_constant = false;
  for (Index j = 0; j < z.cols() && !has_constant; ++j)
    has_constant = z(0, j) != 0.0 && (z.col(j).array() == z(0, j)).all();
  if (!has_constant) throw InvalidArgument("projection: instruments must include a constant");
  const Vector fitted = fitted_values(z, data.Y().col(endog_col));
  const Index dx = data.X().cols();
  Matrix znew(data.n(), dx + 1);
  znew.leftCols(dx) = data.X();
  znew.col(dx) = fitted;
  std::vector<Index> x_in_z(static_cast<std::size_t>(dx));
  for (Index j = 0; j < dx; ++j) x_in_z[static_cast<std::size_t>(j)] = j;
  std::vector<std::string> names = data.x_names();
  names.push_back("fitted(" + data.y_names()[static_cast<std::size_t>(endog_col)] + ")");
  return data.with_instruments(std::move(znew), std::move(x_in_z), std::move(names));
}

EstimateResult initial_estimate(const MomentContext& ctx, const EstimatorOptions& opts) {
  EstimatorOptions sub = opts;
  sub.initial.reset();
  if (opts.initial) {
    EstimateResult r;
    r.kind = EstimatorKind::mm;
    r.beta_hat = ctx.model->box().project(*opts.initial);
    r.tau = ctx.tau;
    r.bandwidth_used = ctx.h;
    r.solver.message = "user-supplied initial value";
    r.solver.converged = true;
    finish_std_errors(r);
    return r;
  }
  if (ctx.dim_z() == ctx.dim_beta()) return estimate_mm(ctx, sub);
  const auto* linear = dynamic_cast<const LinearResidualModel*>(ctx.model.get());
  if (linear && linear->endog_cols().size() == 1 &&
      static_cast<Index>(linear->exog_cols().size()) == ctx.data->X().cols()) {
    auto projected = std::make_shared<const Dataset>(
        projection_instruments(*ctx.data, linear->endog_cols().front()));
    const MomentContext pctx(projected, ctx.model, ctx.tau, ctx.h, ctx.kernel);
    return estimate_mm(pctx, sub);
  }
  EstimateResult r;
  r.kind = EstimatorKind::mm;
  r.beta_hat = ctx.model->initial_guess(*ctx.data);
  r.tau = ctx.tau;
  r.bandwidth_used = ctx.h;
  r.solver.message = "model initial guess";
  r.solver.converged = true;
  finish_std_errors(r);
  return r;
}

namespace {

struct PolishResult {
  Vector x;
  double value;
  int iterations = 0;
  long evaluations = 0;
};

/// Gauss–Newton on Q(β) = M̂ᵀWM̂ with a halving line search, inside the box.
PolishResult polish_criterion(const MomentContext& ctx, const Matrix& w, const Vector& start,
                              int max_iter) {
  const Box& box = ctx.model->box();
  auto crit = [&](const Vector& b) {
    try {
      const Vector m = smoothed_moments(ctx, b);
      return m.dot(w * m);
    } catch (const NumericalError&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  PolishResult out{start, crit(start)};
  out.evaluations = 1;
  for (int it = 0; it < max_iter; ++it) {
    MomentEval ev;
    try {
      ev = evaluate_moments(ctx, out.x, true);
    } catch (const NumericalError&) {
      break;
    }
    const Matrix& j = ev.jacobian;
    const Matrix h = j.transpose() * w * j;
    const Vector grad = j.transpose() * w * ev.moments;
    Eigen::LDLT<Matrix> ldlt(h);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().minCoeff() <= 1e-14 * std::max(1e-300, ldlt.vectorD().maxCoeff()))
      break;
    const Vector dx = -ldlt.solve(grad);
    if (!dx.allFinite()) break;
    ++out.iterations;
    bool improved = false;
    double t = 1.0;
    for (int k = 0; k < 40; ++k, t *= 0.5) {
      const Vector cand = box.project(out.x + t * dx);
      const double v = crit(cand);
      ++out.evaluations;
      if (v < out.value) {
        const double gain = out.value - v;
        const double moved = (cand - out.x).norm();
        out.x = cand;
        out.value = v;
        improved = true;
        if (gain <= 1e-16 * (1.0 + v) || moved <= 1e-13 * (1.0 + out.x.norm())) return out;
        break;
      }
    }
    if (!improved) break;
  }
  return out;
}

}  // namespace

EstimateResult estimate_gmm(const MomentContext& ctx, const Weighting& weighting,
                            const EstimatorOptions& opts) {
  const Index dz = ctx.dim_z();
  if (dz < ctx.dim_beta()) throw IdentificationError("GMM needs d_Z >= d_beta");
  EstimateResult r;
  r.tau = ctx.tau;
  r.bandwidth_used = ctx.h;
  if (dz == ctx.dim_beta())
    r.warnings.emplace_back("model is exactly identified; GMM reduces to MM");

  const EstimateResult init = initial_estimate(ctx, opts);
  const Vector beta_bar = init.beta_hat;
  Matrix w, omega_bar;
  Vector start = beta_bar;
  switch (weighting.kind) {
    case Weighting::Kind::identity:
      r.kind = EstimatorKind::gmm_identity;
      w = Matrix::Identity(dz, dz);
      break;
    case Weighting::Kind::custom: {
      r.kind = EstimatorKind::gmm_custom;
      w = weighting.matrix;
      if (w.rows() != dz || w.cols() != dz) throw InvalidArgument("weighting matrix must be d_Z x d_Z");
      if ((w - w.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, w.cwiseAbs().maxCoeff()))
        throw InvalidArgument("weighting matrix must be symmetric");
      Eigen::LDLT<Matrix> ldlt(w);
      if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 0.0)
        throw IdentificationError("weighting matrix must be positive definite");
      break;
    }
    case Weighting::Kind::two_step: {
      r.kind = EstimatorKind::gmm_two_step;
      omega_bar = omega(ctx, beta_bar, opts.covariance);
      w = floored_spd_inverse(omega_bar, opts.covariance.rel_eigen_floor);
      if (dz > ctx.dim_beta()) {
        try {
          EstimatorOptions os = opts;
          os.compute_covariance = false;
          const EstimateResult one = estimate_one_step(ctx, beta_bar, os);
          start = one.beta_hat;
        } catch (const Error& e) {
          r.warnings.push_back(std::string("one-step update skipped: ") + e.what());
        }
      }
      break;
    }
  }

  auto crit = [&](const Vector& b) {
    const Vector m = smoothed_moments(ctx, b);
    return m.dot(w * m);
  };
  const double tol = moment_tolerance(ctx, opts);
  double q_start = crit(start);
  const double q_bar = crit(beta_bar);
  if (!(q_start <= q_bar)) {
    start = beta_bar;
    q_start = q_bar;
  }

  Vector best = start;
  double best_q = q_start;
  SolverReport rep;
  if (q_start > tol * tol * w.norm()) {
    AnnealingSchedule sched = opts.annealing;
    if (sched.step.size() == 0 && init.std_errors.allFinite() && (init.std_errors.array() > 0.0).all())
      sched.step = (2.0 * init.std_errors).cwiseMax(1e-6 * (1.0 + start.cwiseAbs().array()).matrix());
    const AnnealingResult sa = simulated_annealing(crit, ctx.model->box(), start, sched, opts.seed);
    best = sa.x;
    best_q = sa.value;
    rep = sa.report;
  }
  const PolishResult pol = polish_criterion(ctx, w, best, opts.polish_max_iter);
  if (pol.value <= best_q) {
    best = pol.x;
    best_q = pol.value;
  }
  rep.iterations += pol.iterations;
  rep.evaluations += pol.evaluations;

  if (opts.unsmoothed_final) {
    auto ucrit = [&](const Vector& b) {
      const Vector m = unsmoothed_moments(ctx, b);
      return m.dot(w * m);
    };
    const AnnealingResult sa = simulated_annealing(ucrit, ctx.model->box(), best, opts.annealing,
                                                   opts.seed + 1);
    best = sa.x;
    rep.evaluations += sa.report.evaluations;
    r.warnings.emplace_back("final unsmoothed annealing pass applied");
  }

  r.beta_hat = best;
  r.criterion = crit(best);
  r.moment_norm = smoothed_moments(ctx, best).norm();
  rep.final_norm = r.criterion;
  rep.converged = std::isfinite(r.criterion);
  rep.message = "annealing + Gauss-Newton polish";
  r.solver = rep;
  if (opts.compute_covariance) {
    guarded_covariance(r, [&] {
      const Matrix g = covariance_jacobian(ctx, best, opts, r);
      if (weighting.kind == Weighting::Kind::two_step)
        return asym_cov_mm(g, omega_bar, ctx.data->n(), opts.covariance.rel_eigen_floor);
      return asym_cov_gmm(g, w, long_run_variance(ctx, best, opts.covariance), ctx.data->n());
    });
  } else {
    finish_std_errors(r);
  }
  return r;
}

EstimateResult estimate_2sls(const Dataset& data, const LinearResidualModel& model,
                             const CovarianceSpec& cov) {
  model.validate(data);
  const Vector y = model.outcome(data);
  const Matrix r = model.regressors(data);
  const Matrix& z = data.Z();
  EstimateResult out;
  out.kind = EstimatorKind::two_sls;
  out.tau = kNaN;
  out.beta_hat = two_stage_least_squares(y, r, z);
  out.solver.converged = true;
  out.solver.message = "closed form";

  const Matrix rhat = z * z.colPivHouseholderQr().solve(r);
  const Vector e = y - r * out.beta_hat;
  const double n = static_cast<double>(data.n());
  const Matrix q = rhat.transpose() * rhat / n;
  const Matrix qinv = q.inverse();
  Matrix s;
  if (cov.mode == CovarianceMode::iid) {
    s = (e.squaredNorm() / n) * q;
  } else {
    Matrix contrib = rhat;
    for (Index i = 0; i < contrib.rows(); ++i) contrib.row(i) *= e[i];
    s = hac_from_contributions(contrib, cov);
  }
  out.cov = symmetrize(qinv * s * qinv) / n;
  out.moment_norm = (z.transpose() * e / n).norm();
  finish_std_errors(out);
  return out;
}

EstimateResult estimate_qr(const Dataset& data, std::shared_ptr<const LinearResidualModel> model,
                           double tau, double h, const EstimatorOptions& opts) {
  model->validate(data);
  if (static_cast<Index>(model->exog_cols().size()) != data.X().cols())
    throw InvalidArgument("QR: the model must use every exogenous column");
  const Index dx = data.X().cols();
  Matrix z(data.n(), dx + static_cast<Index>(model->endog_cols().size()));
  z.leftCols(dx) = data.X();
  std::vector<std::string> names = data.x_names();
  Index k = dx;
  for (Index c : model->endog_cols()) {
    z.col(k++) = data.Y().col(c);
    names.push_back(data.y_names()[static_cast<std::size_t>(c)]);
  }
  std::vector<Index> x_in_z(static_cast<std::size_t>(dx));
  for (Index j = 0; j < dx; ++j) x_in_z[static_cast<std::size_t>(j)] = j;
  auto qdata = std::make_shared<const Dataset>(data.with_instruments(std::move(z), x_in_z, names));
  EstimatorOptions o = opts;
  if (!o.initial) {
    // OLS start: with Z = regressors, 2SLS is OLS.
    o.initial = model->initial_guess(*qdata);
  }
  EstimateResult r = estimate_mm(MomentContext(qdata, model, tau, h), o);
  r.kind = EstimatorKind::qr;
  return r;
}

}  // namespace sqiv
