#include "sqiv/optimize.hpp"

#include <cmath>
#include <limits>

#include "sqiv/error.hpp"
#include "sqiv/rng.hpp"

namespace sqiv {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double safe_norm(const VectorFn& f, const Vector& x, Vector& r) {
  try {
    r = f(x);
  } catch (const NumericalError&) {
    return kInf;
  }
  if (!r.allFinite()) return kInf;
  return r.norm();
}

}  // namespace

NewtonResult newton_root(const VectorFn& residual, const MatrixFn& jacobian, const Vector& x0,
                         const Box& box, const NewtonOptions& opt) {
  if (x0.size() != box.dim()) throw InvalidArgument("newton_root: x0 and box dimensions differ");
  NewtonResult out;
  SolverReport& rep = out.report;
  Vector x = box.project(x0);
  Vector r;
  double norm = safe_norm(residual, x, r);
  ++rep.evaluations;
  if (!std::isfinite(norm)) throw NumericalError("newton_root: residual is not finite at x0");
  if (opt.record_path) rep.path.push_back(x);

  while (true) {
    if (norm <= opt.tol) {
      rep.converged = true;
      rep.message = "converged";
      break;
    }
    if (rep.iterations >= opt.max_iter) {
      rep.message = "iteration limit reached";
      break;
    }
    const Matrix j = jacobian(x);
    if (j.rows() != r.size() || j.cols() != x.size())
      throw InvalidArgument("newton_root: Jacobian has the wrong shape");
    Eigen::JacobiSVD<Matrix> svd(j, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sv = svd.singularValues();
    if (!j.allFinite() || sv.size() == 0 || !(sv[0] > 0.0) ||
        sv[sv.size() - 1] < opt.singular_rcond * sv[0] || j.rows() < j.cols()) {
      rep.singular_jacobian = true;
      rep.message = "singular Jacobian";
      break;
    }
    const Vector dx = svd.solve(-r);
    ++rep.iterations;

    double t = 1.0;
    if (opt.max_step) {
      const double cap = opt.max_step(x, dx);
      if (cap > 0.0 && cap < 1.0) t = cap;
    }
    bool accepted = false;
    Vector x_new, r_new;
    for (int k = 0; k <= opt.max_halvings; ++k, t *= 0.5) {
      x_new = box.project(x + t * dx);
      const double n_new = safe_norm(residual, x_new, r_new);
      ++rep.evaluations;
      if (n_new < norm) {
        accepted = true;
        norm = n_new;
        break;
      }
    }
    if (!accepted) {
      rep.message = "line search failed to reduce the residual";
      break;
    }
    const double moved = (x_new - x).norm();
    x = x_new;
    r = r_new;
    if (opt.record_path) rep.path.push_back(x);
    if (norm > opt.tol && moved <= opt.step_tol * (1.0 + x.norm())) {
      rep.message = "step size below tolerance";
      break;
    }
  }
  rep.final_norm = norm;
  out.x = x;
  return out;
}

// ---------------------------------------------------------------------------

AnnealingResult simulated_annealing(const ScalarFn& objective, const Box& box, const Vector& x0,
                                    const AnnealingSchedule& sched, std::uint64_t seed) {
  const Index d = box.dim();
  if (x0.size() != d) throw InvalidArgument("simulated_annealing: x0 and box dimensions differ");
  if (!box.contains(x0)) throw InvalidArgument("simulated_annealing: x0 is outside the box");
  if (!(sched.cooling > 0.0 && sched.cooling < 1.0))
    throw InvalidArgument("cooling factor must lie in (0, 1)");

  auto eval = [&](const Vector& x) {
    double v;
    try {
      v = objective(x);
    } catch (const NumericalError&) {
      return kInf;
    }
    return std::isfinite(v) ? v : kInf;
  };

  AnnealingResult out;
  SolverReport& rep = out.report;
  const long budget = sched.max_evaluations < 0 ? 10000L * d : sched.max_evaluations;

  Vector x = x0;
  double fx = eval(x);
  rep.evaluations = 1;
  if (!std::isfinite(fx)) throw NumericalError("simulated_annealing: objective is not finite at x0");
  out.x = x;
  out.value = fx;
  if (sched.record_path) rep.path.push_back(x);

  Vector step = sched.step;
  if (step.size() == 0) {
    step = 0.1 * box.width();
    const Vector cap = x0.cwiseAbs().cwiseMax(1.0);
    step = step.cwiseMin(cap);
  }
  if (step.size() != d || (step.array() <= 0.0).any())
    throw InvalidArgument("simulated_annealing: step scales must be positive");
  const Vector max_step = box.width().cwiseMax(1e-300);

  Philox4x32 rng(seed, stream_id(0x5A, 0, 0));

  double temperature = sched.initial_temperature;
  if (!(temperature > 0.0) && budget > 0) {
    // Probe points around x0 (within ten proposal scales, clipped to the box).
    double sum = fx, sum2 = fx * fx;
    int count = 1;
    for (int p = 0; p < sched.temperature_probes && rep.evaluations < budget; ++p) {
      Vector probe(d);
      for (Index k = 0; k < d; ++k) probe[k] = x0[k] + 10.0 * step[k] * (2.0 * rng.uniform() - 1.0);
      probe = box.project(probe);
      const double v = eval(probe);
      ++rep.evaluations;
      if (!std::isfinite(v)) continue;
      sum += v;
      sum2 += v * v;
      ++count;
      if (v < out.value) {
        out.value = v;
        out.x = probe;
      }
    }
    const double mean = sum / count;
    temperature = std::sqrt(std::max(0.0, sum2 / count - mean * mean));
    if (!(temperature > 0.0)) temperature = std::max(std::abs(fx), 1e-12);
  }

  const long moves_per_stage = std::max<long>(1, static_cast<long>(sched.moves_per_temperature_per_dim) * d);
  while (rep.evaluations < budget) {
    long accepted = 0, tried = 0;
    const long moves = std::min(moves_per_stage, budget - rep.evaluations);
    for (long m = 0; m < moves; ++m) {
      Vector cand(d);
      for (Index k = 0; k < d; ++k) cand[k] = x[k] + step[k] * rng.normal();
      cand = box.project(cand);
      const double fc = eval(cand);
      ++rep.evaluations;
      ++tried;
      const double u = rng.uniform();
      if (!std::isfinite(fc)) continue;
      if (fc <= fx || u < std::exp(-(fc - fx) / temperature)) {
        x = cand;
        fx = fc;
        ++accepted;
        if (fc < out.value) {  // strict: ties keep the earliest visit
          out.value = fc;
          out.x = cand;
          if (sched.record_path) rep.path.push_back(cand);
        }
      }
    }
    ++rep.iterations;
    out.best_trace.push_back(out.value);
    const double rate = tried > 0 ? static_cast<double>(accepted) / static_cast<double>(tried) : 0.0;
    if (rate > sched.target_acceptance + 0.1)
      step = (step * 1.5).cwiseMin(max_step);
    else if (rate < sched.target_acceptance - 0.1)
      step *= 0.6;
    temperature *= sched.cooling;
  }
  rep.final_norm = out.value;
  rep.converged = true;
  rep.message = "annealing budget exhausted";
  return out;
}

}  // namespace sqiv
