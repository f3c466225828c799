#include "sqiv/moments.hpp"

#include <cmath>
#include <sstream>

#include "sqiv/error.hpp"

namespace sqiv {

MomentContext::MomentContext(std::shared_ptr<const Dataset> data_,
                             std::shared_ptr<const ResidualModel> model_, double tau_, double h_,
                             std::shared_ptr<const SmoothKernel> kernel_)
    : data(std::move(data_)), model(std::move(model_)), tau(tau_), h(h_), kernel(std::move(kernel_)) {
  if (!data || !model || !kernel) throw InvalidArgument("moment context needs data, model and kernel");
  if (!(tau > 0.0 && tau < 1.0)) throw InvalidArgument("tau must lie in (0, 1)");
  if (!(h > 0.0) || !std::isfinite(h)) throw InvalidArgument("bandwidth must be positive and finite");
  if (h < kMinBandwidth) {
    std::ostringstream msg;
    msg << "bandwidth " << h << " clamped to " << kMinBandwidth;
    warn(msg.str());
    h = kMinBandwidth;
  }
  model->validate(*data);
}

MomentContext MomentContext::with_bandwidth(double new_h) const {
  return MomentContext(data, model, tau, new_h, kernel);
}

MomentContext MomentContext::with_tau(double new_tau) const {
  return MomentContext(data, model, new_tau, h, kernel);
}

namespace {

void check_beta(const MomentContext& ctx, const Vector& beta) {
  if (beta.size() != ctx.dim_beta())
    throw InvalidArgument("beta has length " + std::to_string(beta.size()) + ", model expects " +
                          std::to_string(ctx.dim_beta()));
  if (!beta.allFinite()) throw InvalidArgument("beta must be finite");
}

Vector column_means(const Matrix& m) {
  // Fixed-order accumulation keeps results bit-reproducible.
  Vector out = Vector::Zero(m.cols());
  for (Index i = 0; i < m.rows(); ++i) out += m.row(i).transpose();
  return out / static_cast<double>(m.rows());
}

}  // namespace

MomentEval evaluate_moments(const MomentContext& ctx, const Vector& beta, bool with_jacobian) {
  check_beta(ctx, beta);
  const Dataset& data = *ctx.data;
  const Matrix& z = data.Z();
  const Index n = data.n();
  MomentEval out;
  out.residuals = ctx.model->residuals(data, beta);
  if (!out.residuals.allFinite()) throw NumericalError("residual function returned non-finite values");

  out.contributions.resize(n, z.cols());
  Vector weight;  // Ĩ'(-Λ_i/h)
  if (with_jacobian) weight = Vector::Zero(n);
  const SmoothKernel& kernel = *ctx.kernel;
  for (Index i = 0; i < n; ++i) {
    const double u = kernel_argument(out.residuals[i], ctx.h);
    const double ind = kernel.indicator(u);
    out.contributions.row(i) = z.row(i) * (ind - ctx.tau);
    if (with_jacobian) weight[i] = kernel.derivative(u);
  }
  out.moments = column_means(out.contributions);

  if (with_jacobian) {
    out.jacobian = Matrix::Zero(z.cols(), ctx.dim_beta());
    Index active = 0;
    for (Index i = 0; i < n; ++i) active += weight[i] != 0.0 ? 1 : 0;
    if (active > 0) {
      const Matrix grad = ctx.model->gradients(data, beta);
      for (Index i = 0; i < n; ++i) {
        if (weight[i] == 0.0) continue;
        out.jacobian.noalias() += (weight[i] * z.row(i).transpose()) * grad.row(i);
      }
      out.jacobian *= -1.0 / (static_cast<double>(n) * ctx.h);
    }
  }
  return out;
}

Vector smoothed_moments(const MomentContext& ctx, const Vector& beta) {
  // Same arithmetic as evaluate_moments without storing the contributions.
  check_beta(ctx, beta);
  const Vector lambda = ctx.model->residuals(*ctx.data, beta);
  if (!lambda.allFinite()) throw NumericalError("residual function returned non-finite values");
  const Matrix& z = ctx.data->Z();
  const SmoothKernel& kernel = *ctx.kernel;
  Vector acc = Vector::Zero(z.cols());
  for (Index i = 0; i < z.rows(); ++i)
    acc += (z.row(i) * (kernel.indicator(kernel_argument(lambda[i], ctx.h)) - ctx.tau)).transpose();
  return acc / static_cast<double>(z.rows());
}

Vector unsmoothed_moments(const MomentContext& ctx, const Vector& beta) {
  check_beta(ctx, beta);
  const Vector lambda = ctx.model->residuals(*ctx.data, beta);
  const Matrix& z = ctx.data->Z();
  Matrix contrib(z.rows(), z.cols());
  for (Index i = 0; i < z.rows(); ++i)
    contrib.row(i) = z.row(i) * ((lambda[i] <= 0.0 ? 1.0 : 0.0) - ctx.tau);
  return column_means(contrib);
}

Matrix moment_jacobian(const MomentContext& ctx, const Vector& beta) {
  return evaluate_moments(ctx, beta, true).jacobian;
}

Matrix moment_contributions(const MomentContext& ctx, const Vector& beta) {
  return evaluate_moments(ctx, beta, false).contributions;
}

}  // namespace sqiv
