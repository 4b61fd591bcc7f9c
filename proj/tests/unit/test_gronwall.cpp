#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sidlab/gronwall.hpp"
#include "sidlab/rng.hpp"

#include <cmath>

using namespace sidlab;

TEST_CASE("dirac kernel reduces to the linear ODE") {
  const double a = 1.3, b = 0.4, g = 0.2, f0 = 2.0;
  auto s = integrate_extremal(a, b, g, MemoryKernel::dirac(), f0, 5.0, 1e-3);
  const double fin = g / (a - b);
  double worst = 0;
  for (std::size_t k = 0; k < s.times.size(); ++k) {
    const double want = fin + (f0 - fin) * std::exp(-(a - b) * s.times[k]);
    worst = std::max(worst, std::abs(s.values[k] - want));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("zero data stays zero") {
  for (auto k : {MemoryKernel::dirac(), MemoryKernel::uniform(), MemoryKernel::exponential(1.5)}) {
    auto s = integrate_extremal(1.0, 0.5, 0.0, k, 0.0, 3.0, 0.01);
    for (double v : s.values) CHECK(v == 0);
  }
}

TEST_CASE("the stationary constant is preserved by every kernel") {
  const double a = 2.0, b = 0.7, g = 0.65;  // c = g / (a - b) = 0.5
  for (auto k : {MemoryKernel::dirac(), MemoryKernel::uniform(), MemoryKernel::exponential(0.3)}) {
    auto s = integrate_extremal(a, b, g, k, 0.5, 4.0, 0.01);
    for (double v : s.values) CHECK(v == doctest::Approx(0.5).epsilon(1e-10));
  }
}

TEST_CASE("memory averages") {
  std::vector<double> one(101, 1.0);
  for (double m : memory_average(one, MemoryKernel::exponential(2.0), 0.01))
    CHECK(m == doctest::Approx(1).epsilon(1e-12));
  // uniform average of x(s) = s on [0, t] is t/2
  std::vector<double> lin(201);
  for (std::size_t k = 0; k < lin.size(); ++k) lin[k] = 0.01 * k;
  auto m = memory_average(lin, MemoryKernel::uniform(), 0.01);
  CHECK(m.back() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m[100] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("uniform memory decays slower than dirac") {
  auto d = integrate_extremal(1.0, 0.5, 0.0, MemoryKernel::dirac(), 1.0, 6.0, 1e-3);
  auto u = integrate_extremal(1.0, 0.5, 0.0, MemoryKernel::uniform(), 1.0, 6.0, 1e-3);
  CHECK(u.values.back() > d.values.back());
  CHECK(u.values.back() > 0);
}

TEST_CASE("envelope shape") {
  auto e = build_envelope(1.0, 0.25, MemoryKernel::uniform(), 40.0, 0.01);
  CHECK(e.c == doctest::Approx(0.5));
  CHECK(e.nonincreasing);
  CHECK(e.depth >= 1);
  CHECK(e.steps.front() == 0);
  for (std::size_t k = 0; k + 1 < e.steps.size(); ++k) CHECK(e.steps[k + 1] >= e.steps[k] + 1 - 1e-9);
  CHECK(e.x.front() == doctest::Approx(1));
}

TEST_CASE("random domination suites") {
  Rng rng(derive_stream(17, {static_cast<std::uint64_t>(Purpose::suite)}));
  std::size_t failures = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const double a = 0.5 + 2.5 * rng.uniform();
    const double b = a * (0.05 + 0.85 * rng.uniform());
    const double g = 2 * rng.uniform();
    const double f0 = 3 * rng.uniform();
    MemoryKernel k = trial % 3 == 0   ? MemoryKernel::dirac()
                     : trial % 3 == 1 ? MemoryKernel::uniform()
                                      : MemoryKernel::exponential(0.2 + 2 * rng.uniform());
    const double T = 15, dt = 0.005;
    auto f = integrate_extremal(a, b, g, k, f0, T, dt);
    auto env = build_envelope(a, b, k, T, dt);
    auto rep = verify_domination(f, a, b, g, env);
    if (!rep.ok) ++failures;
  }
  CHECK(failures == 0);
}

TEST_CASE("a forcing deficit lowers the solution") {
  const double a = 1.0, b = 0.6, g = 0.5;
  auto k = MemoryKernel::exponential(1.0);
  auto full = integrate_extremal(a, b, g, k, 1.0, 5.0, 0.01);
  auto sub = integrate_extremal(a, b, g, k, 1.0, 5.0, 0.01, [](double t) { return 0.3 * (1 + std::sin(t)); });
  for (std::size_t i = 0; i < full.values.size(); ++i) CHECK(sub.values[i] <= full.values[i] + 1e-12);
}

TEST_CASE("bad parameters are refused") {
  CHECK_THROWS(integrate_extremal(0.5, 0.5, 0, MemoryKernel::dirac(), 1, 1, 0.1));
  CHECK_THROWS(integrate_extremal(1, 0.5, 0, MemoryKernel::dirac(), 1, 1, -0.1));
  CHECK_THROWS(build_envelope(1, 2, MemoryKernel::dirac(), 1, 0.1));
}
