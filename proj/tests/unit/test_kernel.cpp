#include <doctest.h>

#include <cmath>

#include "sqiv/error.hpp"
#include "sqiv/kernel.hpp"

using namespace sqiv;

namespace {

// Closed form of the indicator, written out independently of the library.
double poly4(double u) {
  if (u <= -1.0) return 0.0;
  if (u >= 1.0) return 1.0;
  return 0.5 + 105.0 / 64.0 * (u - 5.0 * std::pow(u, 3) / 3.0 + 7.0 * std::pow(u, 5) / 5.0 - 3.0 * std::pow(u, 7) / 7.0);
}

// Simpson's rule for the k-th moment of the derivative on [-1, 1].
double simpson_moment(int k) {
  const int m = 20000;
  const double step = 2.0 / m;
  double acc = 0.0;
  for (int i = 0; i <= m; ++i) {
    const double u = -1.0 + i * step;
    const double w = (i == 0 || i == m) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    acc += w * std::pow(u, k) * smoothed_indicator_deriv(u);
  }
  return acc * step / 3.0;
}

}  // namespace

TEST_CASE("indicator matches the closed-form polynomial and its limits") {
  for (double u = -1.5; u <= 1.5; u += 0.01) CHECK(smoothed_indicator(u) == doctest::Approx(poly4(u)).epsilon(1e-14));
  CHECK(smoothed_indicator(-1.0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(smoothed_indicator(1.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(smoothed_indicator(0.0) == 0.5);
}

TEST_CASE("indicator is antisymmetric about one half") {
  for (double u = 0.0; u <= 1.2; u += 0.013) CHECK(smoothed_indicator(u) + smoothed_indicator(-u) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("derivative agrees with central differences") {
  const double e = 1e-6;
  for (double u = -0.99; u < 1.0; u += 0.07) {
    const double fd = (smoothed_indicator(u + e) - smoothed_indicator(u - e)) / (2 * e);
    CHECK(smoothed_indicator_deriv(u) == doctest::Approx(fd).epsilon(1e-7));
  }
  CHECK(smoothed_indicator_deriv(1.2) == 0.0);
  CHECK(smoothed_indicator_deriv(-1.2) == 0.0);
}

TEST_CASE("kernel moments agree with numerical quadrature") {
  for (int k = 0; k <= 6; ++k) CHECK(kernel_moment(k) == doctest::Approx(simpson_moment(k)).epsilon(1e-10));
  CHECK(kernel_moment(4) == doctest::Approx(-1.0 / 33.0).epsilon(1e-14));
}

TEST_CASE("Epanechnikov kernel is second order and monotone") {
  auto k = epanechnikov_kernel();
  CHECK(k->order() == 2);
  CHECK(k->moment(0) == doctest::Approx(1.0));
  CHECK(k->moment(2) == doctest::Approx(0.2));
  double prev = -1.0;
  for (double u = -1.0; u <= 1.0; u += 0.01) {
    CHECK(k->indicator(u) >= prev);
    prev = k->indicator(u);
  }
  CHECK(kernel_by_name("poly4")->order() == 4);
  CHECK_THROWS_AS(kernel_by_name("gaussian"), InvalidArgument);
}

TEST_CASE("non-finite input is rejected") {
  CHECK_THROWS_AS(smoothed_indicator(std::nan("")), InvalidArgument);
}
