#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sidlab/toychain.hpp"

#include <algorithm>
#include <cmath>

using namespace sidlab;

namespace {
ChainParams chain(double a, double alpha, double s2) {
  ChainParams p;
  p.a01 = p.a10 = a;
  p.alpha = alpha;
  p.sigma = std::sqrt(s2);
  return p;
}

// sup |F_n - F| for a sample against a cdf
template <class F>
double ks_distance(std::vector<double> x, F cdf) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, std::abs((i + 1) / n - f), std::abs(i / n - f)});
  }
  return d;
}
}  // namespace

TEST_CASE("symmetric chain relaxes to one half") {
  auto p = chain(1.0, 0.4, 0.5);
  auto path = occupancy_until_settled(p);
  CHECK(path.x.back() == doctest::Approx(0.5).epsilon(1e-9));
  for (std::size_t k = 1; k < path.x.size(); ++k) CHECK(path.x[k] <= path.x[k - 1] + 1e-15);
}

TEST_CASE("alpha = 0 matches the closed form") {
  auto p = chain(1.0, 0.0, 0.5);
  const double r = std::exp(-1.0 / 0.5);
  auto path = occupancy_ode(p, 10.0, 0.01);
  double worst = 0, worst_s = 0;
  for (std::size_t k = 0; k < path.times.size(); ++k) {
    const double t = path.times[k];
    worst = std::max(worst, std::abs(path.x[k] - (0.5 + 0.5 * std::exp(-2 * r * t))));
    worst_s = std::max(worst_s, std::abs(exit_survival(p, t, path) - std::exp(-r * t)));
  }
  CHECK(worst < 1e-10);
  CHECK(worst_s < 1e-8);
  CHECK_THROWS(exit_survival(p, 11.0, path));
}

TEST_CASE("asymmetric rates follow the chain") {
  ChainParams p;
  p.a01 = 1.0;
  p.a10 = 0.6;
  p.alpha = 0.2;
  p.sigma = 1.0;
  auto path = occupancy_until_settled(p);
  const double x = path.x.back();
  CHECK(p.rate01(x) * x == doctest::Approx(p.rate10(x) * (1 - x)).epsilon(1e-8));
  CHECK_THROWS(exponent_spread(p, {1.0}, 10, {1.0}, 0.1, 1));
}

TEST_CASE("sampled exit times match the survival function") {
  for (double alpha : {0.0, 0.4}) {
    auto p = chain(1.0, alpha, 0.25);
    auto path = occupancy_until_settled(p);
    Rng rng(derive_stream(31, {static_cast<std::uint64_t>(alpha * 10)}));
    const std::size_t n = 20000;
    auto tau = sample_exit_times(p, path, n, rng);
    auto cdf = [&](double t) {
      if (t >= path.times.back()) {
        const double h = path.hazard.back() + (t - path.times.back()) * p.rate01(path.x.back());
        return 1 - std::exp(-h);
      }
      return 1 - exit_survival(p, t, path);
    };
    // DKW at level 1e-3
    const double eps = std::sqrt(std::log(2 / 1e-3) / (2.0 * n));
    CAPTURE(alpha);
    CHECK(ks_distance(tau, cdf) < eps);
    // binomial check at the median of the exact law
    double lo = 0, hi = path.times.back();
    for (int it = 0; it < 200; ++it) {
      double mid = 0.5 * (lo + hi);
      (cdf(mid) < 0.5 ? lo : hi) = mid;
    }
    const double frac = std::count_if(tau.begin(), tau.end(), [&](double t) { return t > hi; }) /
                        static_cast<double>(n);
    CHECK(std::abs(frac - 0.5) < 4 * std::sqrt(0.25 / n));
  }
}

TEST_CASE("alpha = 0 gives a Kolmogorov-Smirnov fit to the exponential law") {
  auto p = chain(1.0, 0.0, 0.3);
  const double r = std::exp(-1.0 / 0.3);
  Rng rng(5);
  auto tau = sample_exit_times(p, 5000, rng);
  CHECK(ks_distance(tau, [r](double t) { return 1 - std::exp(-r * t); }) < 0.05);
}

TEST_CASE("exponent spread concentrates for alpha = 0") {
  auto p = chain(1.0, 0.0, 0.1);
  auto tab = exponent_spread(p, {std::sqrt(0.1), std::sqrt(0.05), std::sqrt(0.025)}, 4000, {1.0}, 0.1, 3);
  CHECK(tab.mass.size() == 3);
  CHECK(tab.mass[2][0] > tab.mass[0][0]);
  CHECK(tab.outside[2] < tab.outside[0]);
  // same seed, same table
  auto again = exponent_spread(p, {std::sqrt(0.1)}, 4000, {1.0}, 0.1, 3);
  CHECK(again.exponents[0] == tab.exponents[0]);
}

TEST_CASE("parameter checks") {
  CHECK_THROWS(chain(1.0, 1.0, 0.1).validate());
  CHECK_THROWS(chain(-1.0, 0.0, 0.1).validate());
  CHECK_THROWS(chain(1.0, 0.0, 0.0).validate());
}
