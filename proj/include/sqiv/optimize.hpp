#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sqiv/model.hpp"

namespace sqiv {

struct SolverReport {
  bool converged = false;
  int iterations = 0;
  long evaluations = 0;
  double final_norm = 0.0;  // ‖residual‖ for root finding, criterion value for minimization
  bool singular_jacobian = false;
  std::string message;
  std::vector<Vector> path;  // iterates, only when requested
};

using VectorFn = std::function<Vector(const Vector&)>;
using MatrixFn = std::function<Matrix(const Vector&)>;
using ScalarFn = std::function<double(const Vector&)>;

struct NewtonOptions {
  double tol = 1e-10;       // on the Euclidean norm of the residual
  double step_tol = 1e-14;  // relative step size below which iteration stalls
  int max_iter = 100;
  int max_halvings = 40;
  double singular_rcond = 1e-13;
  bool record_path = false;
  /// Optional cap on the step: given x and the full Newton step dx, returns
  /// the largest admissible fraction t in (0, 1] of dx.
  std::function<double(const Vector&, const Vector&)> max_step;
};

struct NewtonResult {
  Vector x;
  SolverReport report;
};

/// Damped Newton root finder. Each step solves J dx = -r, then halves the step
/// until ‖r‖ decreases; iterates are projected into the box. A singular
/// Jacobian stops the iteration with report.singular_jacobian set so callers
/// can fall back (e.g. to a larger bandwidth).
NewtonResult newton_root(const VectorFn& residual, const MatrixFn& jacobian, const Vector& x0,
                         const Box& box, const NewtonOptions& options = {});

struct AnnealingSchedule {
  double cooling = 0.95;
  int moves_per_temperature_per_dim = 200;
  long max_evaluations = -1;       // negative → 10⁴ · dim; 0 → return x0 untouched
  double initial_temperature = 0;  // 0 → spread of the objective over probe points near x0
  int temperature_probes = 50;
  /// Per-coordinate proposal scale; empty → 10% of the box width, capped at
  /// max(1, |x0|).
  Vector step;
  double target_acceptance = 0.4;
  bool record_path = false;
};

struct AnnealingResult {
  Vector x;
  double value = 0.0;
  SolverReport report;
  std::vector<double> best_trace;  // best-so-far value after each temperature stage
};

/// Simulated annealing over a box. Deterministic for a given seed; returns the
/// best point visited (never worse than x0). Non-finite objective values are
/// treated as rejected proposals.
AnnealingResult simulated_annealing(const ScalarFn& objective, const Box& box, const Vector& x0,
                                    const AnnealingSchedule& schedule, std::uint64_t seed);

}  // namespace sqiv
