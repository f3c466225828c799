#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "sqiv/error.hpp"
#include "sqiv/moments.hpp"
#include "sqiv/rng.hpp"
#include "sqiv/simulation.hpp"

using namespace sqiv;

namespace {

Matrix fd_jacobian(const MomentContext& ctx, const Vector& beta) {
  Matrix j(ctx.dim_z(), beta.size());
  for (Index k = 0; k < beta.size(); ++k) {
    const double e = 1e-6 * std::max(1.0, std::abs(beta[k]));
    Vector up = beta, dn = beta;
    up[k] += e;
    dn[k] -= e;
    j.col(k) = (smoothed_moments(ctx, up) - smoothed_moments(ctx, dn)) / (2 * e);
  }
  return j;
}

}  // namespace

TEST_CASE("moments equal the written-out average") {
  auto data = std::make_shared<const Dataset>(gen_dgp2(40, 3, 0));
  const MomentContext ctx(data, dgp_model(), 0.3, 0.4);
  Vector beta(2);
  beta << 1.1, -0.2;
  Vector manual = Vector::Zero(data->Z().cols());
  for (Index i = 0; i < data->n(); ++i) {
    const double lam = data->Y()(i, 0) - data->Y()(i, 1) * beta[0] - data->X()(i, 0) * beta[1];
    manual += data->Z().row(i).transpose() * (smoothed_indicator(-lam / 0.4) - 0.3);
  }
  manual /= static_cast<double>(data->n());
  CHECK((smoothed_moments(ctx, beta) - manual).norm() < 1e-14);
  CHECK((moment_contributions(ctx, beta).colwise().mean().transpose() - manual).norm() < 1e-14);
}

TEST_CASE("linear Jacobian matches finite differences") {
  auto data = std::make_shared<const Dataset>(gen_dgp4(120, 5, 1));
  for (double h : {0.1, 0.5, 2.0}) {
    const MomentContext ctx(data, dgp_model(), 0.5, h);
    Vector beta(2);
    beta << 0.2, 0.0;
    const Matrix a = moment_jacobian(ctx, beta);
    CHECK((a - fd_jacobian(ctx, beta)).norm() <= 1e-6 * a.norm());
  }
}

TEST_CASE("unsmoothed moments count non-positive residuals") {
  auto data = std::make_shared<const Dataset>(gen_dgp2(31, 4, 0));
  const MomentContext ctx(data, dgp_model(), 0.5, 1e-3);
  Vector beta(2);
  beta << 1.0, 0.0;
  const Vector m = unsmoothed_moments(ctx, beta);
  double count = 0;
  for (Index i = 0; i < data->n(); ++i) count += (data->Y()(i, 0) - data->Y()(i, 1) - 0.0 <= 0.0);
  CHECK(m[0] == doctest::Approx(count / 31.0 - 0.5).epsilon(1e-14));
}

TEST_CASE("bandwidth and quantile level are validated") {
  auto data = std::make_shared<const Dataset>(gen_dgp2(20, 4, 0));
  CHECK(MomentContext(data, dgp_model(), 0.5, 1e-15).h == kMinBandwidth);
  CHECK_THROWS_AS(MomentContext(data, dgp_model(), 0.5, 0.0), InvalidArgument);
  CHECK_THROWS_AS(MomentContext(data, dgp_model(), 1.0, 0.1), InvalidArgument);
}
