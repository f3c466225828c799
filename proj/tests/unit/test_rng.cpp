#include <doctest.h>

#include <cmath>
#include <set>

#include "sqiv/bandwidth.hpp"
#include "sqiv/optimize.hpp"
#include "sqiv/rng.hpp"
#include "sqiv/simulation.hpp"

using namespace sqiv;

TEST_CASE("Philox4x32-10 known-answer vectors") {
  const auto zero = Philox4x32::encrypt({0, 0, 0, 0}, {0, 0});
  CHECK(zero == Philox4x32::Block{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  const auto ones = Philox4x32::encrypt({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                        {0xffffffffu, 0xffffffffu});
  CHECK(ones == Philox4x32::Block{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
}

TEST_CASE("streams are reproducible and distinct") {
  Philox4x32 a(7, 1), b(7, 1), c(7, 2);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a();
    CHECK(x == b());
    differs = differs || x != c();
  }
  CHECK(differs);
  std::set<std::uint64_t> ids;
  for (std::uint32_t t = 1; t <= 4; ++t)
    for (std::uint32_t n : {20u, 50u, 200u})
      for (std::uint32_t r = 0; r < 50; ++r) ids.insert(stream_id(t, n, r));
  CHECK(ids.size() == 4 * 3 * 50);
}

TEST_CASE("variates have the right first two moments") {
  Philox4x32 g(11, 0);
  double s = 0, s2 = 0, umin = 1, umax = 0;
  const int m = 200000;
  for (int i = 0; i < m; ++i) {
    const double u = g.uniform();
    umin = std::min(umin, u);
    umax = std::max(umax, u);
    const double z = g.normal();
    s += z;
    s2 += z * z;
  }
  CHECK(umin > 0.0);
  CHECK(umax < 1.0);
  CHECK(std::abs(s / m) < 0.01);
  CHECK(std::abs(s2 / m - 1.0) < 0.02);
}

TEST_CASE("bandwidth policies") {
  const Dataset d = gen_dgp2(128, 1, 0);
  CHECK(select_bandwidth(BandwidthPolicy::rate(1.0, -1.0 / 7.0), d, *dgp_model(), 0.5) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(select_bandwidth(BandwidthPolicy::fixed(0.3), d, *dgp_model(), 0.5) == 0.3);
  CHECK(BandwidthPolicy::parse("rate:2,-0.2").c == 2.0);
  CHECK(BandwidthPolicy::parse("rate:2,-0.2").exponent == -0.2);
  CHECK(BandwidthPolicy::parse("fixed:0.01").value == 0.01);
  const double p = select_bandwidth(BandwidthPolicy::plugin(), d, *dgp_model(), 0.5);
  CHECK(p > 0.0);
  CHECK(std::isfinite(p));
  CHECK_THROWS(BandwidthPolicy::parse("silverman"));
}

TEST_CASE("Newton finds a root and annealing a minimum") {
  const Box box = Box::uniform(2, 10.0);
  Vector x0(2);
  x0 << 3.0, -2.0;
  const auto r = newton_root(
      [](const Vector& x) {
        Vector f(2);
        f << x[0] * x[0] - 2.0, x[0] + x[1];
        return f;
      },
      [](const Vector& x) {
        Matrix j(2, 2);
        j << 2 * x[0], 0, 1, 1;
        return j;
      },
      x0, box);
  CHECK(r.report.converged);
  CHECK(r.x[0] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-10));
  CHECK(r.x[1] == doctest::Approx(-std::sqrt(2.0)).epsilon(1e-10));

  AnnealingSchedule sched;
  const auto obj = [](const Vector& x) { return (x[0] - 1.0) * (x[0] - 1.0) + 4.0 * (x[1] + 2.0) * (x[1] + 2.0); };
  const auto a = simulated_annealing(obj, box, x0, sched, 5);
  const auto b = simulated_annealing(obj, box, x0, sched, 5);
  CHECK(a.value <= obj(x0));
  CHECK(a.x[0] == doctest::Approx(1.0).epsilon(0.05));
  CHECK(a.x[1] == doctest::Approx(-2.0).epsilon(0.05));
  CHECK(a.x == b.x);
}
