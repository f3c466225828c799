#include <doctest.h>

#include <cmath>
#include <random>

#include "sqiv/covariance.hpp"
#include "sqiv/linalg.hpp"
#include "sqiv/simulation.hpp"

using namespace sqiv;

TEST_CASE("HAC weights") {
  CHECK(hac_weight(HacKernel::bartlett, 0.0) == 1.0);
  CHECK(hac_weight(HacKernel::bartlett, 0.25) == doctest::Approx(0.75));
  CHECK(hac_weight(HacKernel::bartlett, 1.0) == 0.0);
  CHECK(hac_weight(HacKernel::bartlett, 3.0) == 0.0);
  CHECK(hac_weight(HacKernel::quadratic_spectral, 0.0) == 1.0);
  // QS at x = 1: z = 6π/5, 25/(12π²) (sin z / z - cos z).
  const double z = 6.0 * M_PI / 5.0;
  CHECK(hac_weight(HacKernel::quadratic_spectral, 1.0) ==
        doctest::Approx(25.0 / (12.0 * M_PI * M_PI) * (std::sin(z) / z - std::cos(z))).epsilon(1e-12));
}

TEST_CASE("lag autocovariance is the written-out sum") {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> nd;
  Matrix g(25, 3);
  for (Index i = 0; i < g.rows(); ++i)
    for (Index j = 0; j < g.cols(); ++j) g(i, j) = nd(gen);
  for (Index lag = 0; lag < 4; ++lag) {
    Matrix manual = Matrix::Zero(3, 3);
    for (Index t = lag; t < 25; ++t) manual += g.row(t).transpose() * g.row(t - lag);
    manual /= 25.0;
    CHECK((lag_autocovariance(g, lag) - manual).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("Bartlett HAC equals the double sum over all lag pairs") {
  std::mt19937_64 gen(9);
  std::normal_distribution<double> nd;
  Matrix g(25, 2);
  for (Index i = 0; i < g.rows(); ++i)
    for (Index j = 0; j < g.cols(); ++j) g(i, j) = nd(gen);
  CovarianceSpec spec;
  spec.mode = CovarianceMode::hac;
  spec.hac_kernel = HacKernel::bartlett;
  spec.hac_bandwidth = 3.0;
  Matrix brute = Matrix::Zero(2, 2);
  for (Index t = 0; t < 25; ++t)
    for (Index u = 0; u < 25; ++u)
      brute += std::max(0.0, 1.0 - std::abs(double(t - u)) / 3.0) * g.row(t).transpose() * g.row(u) / 25.0;
  CHECK((hac_from_contributions(g, spec) - brute).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("Andrews bandwidth is positive and finite") {
  auto data = std::make_shared<const Dataset>(gen_dgp4(200, 2, 0));
  const MomentContext ctx(data, dgp_model(), 0.5, 0.1);
  Vector beta(2);
  beta << 0.2, 0.0;
  const Matrix g = moment_contributions(ctx, beta);
  for (auto k : {HacKernel::bartlett, HacKernel::quadratic_spectral}) {
    const double s = andrews_bandwidth(g, k);
    CHECK(std::isfinite(s));
    CHECK(s > 0.0);
  }
}

TEST_CASE("quantile score variance scales Z'Z/n by tau(1-tau)") {
  const Dataset d = gen_dgp2(50, 1, 0);
  const Matrix zz = d.Z().transpose() * d.Z() / 50.0;
  CHECK((sigma_iid_quantile(d, 0.5) - 0.25 * zz).norm() < 1e-13);
  CHECK((sigma_iid_quantile(d, 0.25) - 0.1875 * zz).norm() < 1e-13);
}

TEST_CASE("asymptotic covariance formulas") {
  SUBCASE("scalar case") {
    Matrix g(1, 1), s(1, 1), w(1, 1);
    g << 2.0;
    s << 3.0;
    w << 7.0;
    CHECK(asym_cov_mm(g, s, 10)(0, 0) == doctest::Approx(3.0 / 4.0 / 10.0));
    CHECK(asym_cov_gmm(g, w, s, 10)(0, 0) == doctest::Approx(3.0 / 4.0 / 10.0));
  }
  SUBCASE("the sandwich collapses under W = inverse Sigma") {
    std::mt19937_64 gen(4);
    std::normal_distribution<double> nd;
    Matrix g(5, 2), a(5, 5);
    for (Index i = 0; i < 5; ++i) {
      for (Index j = 0; j < 2; ++j) g(i, j) = nd(gen);
      for (Index j = 0; j < 5; ++j) a(i, j) = nd(gen);
    }
    const Matrix s = a * a.transpose() + Matrix::Identity(5, 5);
    const Matrix collapsed = (g.transpose() * s.inverse() * g).inverse() / 100.0;
    CHECK((asym_cov_gmm(g, s.inverse(), s, 100) - collapsed).norm() < 1e-10 * collapsed.norm());
    CHECK((asym_cov_mm(g, s, 100) - collapsed).norm() < 1e-10 * collapsed.norm());
    CHECK(min_eigenvalue(symmetrize(asym_cov_gmm(g, Matrix::Identity(5, 5), s, 100) - collapsed)) > -1e-12);
  }
}

TEST_CASE("covariance spec parsing") {
  const CovarianceSpec s = parse_covariance("hac", "bartlett", "4");
  CHECK(s.mode == CovarianceMode::hac);
  CHECK(s.hac_kernel == HacKernel::bartlett);
  CHECK(*s.hac_bandwidth == 4.0);
  CHECK_FALSE(parse_covariance("hac", "qs", "auto").hac_bandwidth.has_value());
  CHECK_THROWS(parse_covariance("robust", "qs", "auto"));
}
