#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sidlab/exits.hpp"
#include "sidlab/presets.hpp"

#include <cmath>

using namespace sidlab;

TEST_CASE("linear crossing is interpolated") {
  auto D = Domain::ball(Vector::Zero(1), 1.0);
  Cloud path(3, 1);
  path << 0.0, 0.5, 1.5;
  auto e = first_exit({0.0, 1.0, 2.0}, path, D);
  CHECK(!e.censored);
  CHECK(e.time == doctest::Approx(1.5));
  path << 0.0, 0.5, 0.9;
  e = first_exit({0.0, 1.0, 2.0}, path, D);
  CHECK(e.censored);
  CHECK(e.time == 2.0);
  path << 1.2, 0.0, 0.0;
  CHECK_THROWS(first_exit({0.0, 1.0, 2.0}, path, D));
}

TEST_CASE("product and halfspace domains") {
  auto P = Domain::product(Vector::Constant(1, 0.5), 1.0, 2);
  Vector z(2);
  z << 0.5, 100.0;
  CHECK(P.contains(z));
  z << 1.6, 0.0;
  CHECK(!P.contains(z));

  Matrix N(2, 1);
  N << 1, -1;
  Vector b(2);
  b << 1, 2;
  auto H = Domain::halfspaces(N, b, Vector::Zero(1));
  CHECK(H.signed_distance(Vector::Constant(1, 0.0)) == doctest::Approx(-1));
  CHECK(H.signed_distance(Vector::Constant(1, -2.5)) == doctest::Approx(0.5));
  CHECK(H.inradius() == doctest::Approx(1));
}

TEST_CASE("nested domains are nested") {
  auto D = Domain::ball(Vector::Zero(2), 1.0);
  auto [inner, outer] = nested_domains(D, 0.2);
  Rng rng(4);
  for (int k = 0; k < 500; ++k) {
    Vector z(2);
    z << 3 * rng.uniform() - 1.5, 3 * rng.uniform() - 1.5;
    if (inner.contains(z)) CHECK(D.contains(z));
    if (D.contains(z)) CHECK(outer.contains(z));
  }
  CHECK_THROWS(nested_domains(D, 1.0));
  CHECK_THROWS(nested_domains(D, -0.1));
}

TEST_CASE("exit times are monotone in nested domains along a path") {
  Rng rng(5);
  auto D = Domain::ball(Vector::Zero(1), 1.0);
  auto [inner, outer] = nested_domains(D, 0.1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> t{0};
    Cloud path(401, 1);
    path(0, 0) = 0;
    for (int k = 1; k <= 400; ++k) {
      t.push_back(k * 0.01);
      path(k, 0) = path(k - 1, 0) + 0.15 * rng.normal();
    }
    auto ei = first_exit(t, path, inner), e = first_exit(t, path, D), eo = first_exit(t, path, outer);
    CHECK(ei.time <= e.time);
    CHECK(e.time <= eo.time);
  }
}

TEST_CASE("Kramers fit recovers a synthetic barrier") {
  // tau ~ Exp with mean exp(H / (theta sigma^2)): E log tau = H/(theta sigma^2) - Euler gamma
  const double H = 0.8, theta = 1.0;
  Rng rng(derive_stream(8, {1}));
  std::vector<SigmaSamples> s;
  for (double s2 : {0.2, 0.3, 0.45, 0.7}) {
    SigmaSamples x;
    x.sigma = std::sqrt(s2);
    const double mean = std::exp(H / (theta * s2));
    for (int i = 0; i < 4000; ++i) {
      x.tau.push_back(mean * rng.exponential());
      x.censored.push_back(0);
    }
    s.push_back(x);
  }
  auto fit = kramers_fit(s, theta);
  CHECK(fit.barrier == doctest::Approx(H).epsilon(0.05));
  CHECK(fit.barrier_lo < H);
  CHECK(fit.barrier_hi > H);
  CHECK(fit.intercept == doctest::Approx(-0.5772156649).epsilon(0.1));
}

TEST_CASE("Kramers fit refuses thin data") {
  std::vector<SigmaSamples> s(3);
  for (std::size_t j = 0; j < 3; ++j) {
    s[j].sigma = 0.5 + 0.1 * j;
    for (int i = 0; i < 40; ++i) {
      s[j].tau.push_back(1.0 + i);
      s[j].censored.push_back(j == 2 ? (i % 4 != 0) : 0);
    }
  }
  CHECK_THROWS_AS(kramers_fit(s), InsufficientDataError);
  CHECK(s[2].censored_fraction() == doctest::Approx(0.75));
}

TEST_CASE("default grid spans exponents 4 down to 1.2") {
  auto g = default_sigma_grid(0.55, 4, 1.0);
  CHECK(g.size() == 4);
  CHECK(0.55 / (g.front() * g.front()) == doctest::Approx(4));
  CHECK(0.55 / (g.back() * g.back()) == doctest::Approx(1.2));
  CHECK_THROWS(default_sigma_grid(-1, 4));
}

TEST_CASE("Mann-Whitney direction") {
  std::vector<double> a, b;
  for (int i = 0; i < 50; ++i) {
    a.push_back(i);
    b.push_back(i + 30);
  }
  CHECK(mann_whitney_less(a, b) < 1e-3);
  CHECK(mann_whitney_less(b, a) > 0.99);
  CHECK(mann_whitney_less(a, a) == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("deterministic invariance of the preset domain") {
  auto p = preset("overdamped-quadratic-interacting");
  IntegratorSettings st;
  st.dt = 0.01;
  st.particles = 64;
  auto rep = deterministic_invariance_check(p.model.with_sigma(0.0), p.domain, 5.0, st);
  CHECK(rep.start_inside);
  CHECK(rep.ok);
  CHECK_THROWS(deterministic_invariance_check(p.model, p.domain, 1.0, st));
}

TEST_CASE("small campaign produces censoring-aware samples") {
  auto p = preset("overdamped-quadratic");
  CampaignOptions o;
  o.sigma = {0.9, 1.0, 1.2};
  o.replicas = 40;
  o.settings.dt = 0.01;
  o.settings.particles = 1;
  o.settings.seed = 2;
  o.predicted_H = 1.0;
  o.allow_coarse_dt = true;
  o.workers = 1;
  auto r = run_campaign(p.model, p.domain, o);
  CHECK(r.samples.size() == 3);
  for (const auto& s : r.samples) {
    CHECK(s.tau.size() == 40);
    for (double t : s.tau) CHECK(t > 0);
  }
  CHECK(r.model_hash != 0);
  // the same request is reproducible
  auto again = run_campaign(p.model, p.domain, o);
  CHECK(again.samples[1].tau == r.samples[1].tau);
}

TEST_CASE("interacting exit times are stochastically smaller at matched seeds") {
  auto inter = preset("overdamped-quadratic-interacting");
  auto plain = preset("overdamped-quadratic");
  CampaignOptions o;
  o.sigma = default_sigma_grid(*inter.predicted_H, 4, inter.model.theta());
  o.replicas = 200;
  o.settings.dt = 0.01;
  o.settings.seed = 12;
  o.workers = 1;
  o.predicted_H = inter.predicted_H;
  o.settings.particles = 256;
  auto a = run_campaign(inter.model, inter.domain, o);
  o.predicted_H = plain.predicted_H;
  o.settings.particles = 1;
  auto b = run_campaign(plain.model, plain.domain, o);
  for (std::size_t j = 0; j < o.sigma.size(); ++j) {
    CAPTURE(o.sigma[j]);
    CHECK(mann_whitney_less(a.samples[j].tau, b.samples[j].tau) < 0.01);
  }
}

TEST_CASE("halving dt moves mean log tau by less than the standard error") {
  // fine and coarse Euler paths share Brownian increments; the coarse step uses the sum of two fine ones
  auto p = preset("overdamped-quadratic");
  const double dt = 2e-3;
  const std::size_t reps = 300;
  for (double s2 : {0.5, 0.75, 1.0}) {
    auto c = p.model.with_sigma(std::sqrt(s2));
    std::vector<double> coarse, fine;
    for (std::size_t r = 0; r < reps; ++r) {
      IntegratorSettings sc, sf;
      sc.dt = dt;
      sf.dt = dt / 2;
      Cloud x0 = Cloud::Zero(1, 1);
      ParticleSystem a(c, sc, x0), b(c, sf, x0);
      ExitDetector da(p.domain, 0.0, a.positions().row(0).data());
      ExitDetector db(p.domain, 0.0, b.positions().row(0).data());
      Rng rng(derive_stream(77, {static_cast<std::uint64_t>(s2 * 100), r}));
      Cloud x1(1, 1), x2(1, 1), xs(1, 1);
      while (!da.exited() || !db.exited()) {
        x1(0, 0) = rng.normal();
        x2(0, 0) = rng.normal();
        if (!db.exited()) {
          b.step(x1);
          if (!db.observe(b.time(), b.positions().row(0).data())) {
            b.step(x2);
            db.observe(b.time(), b.positions().row(0).data());
          }
        }
        if (!da.exited()) {
          xs(0, 0) = (x1(0, 0) + x2(0, 0)) / std::sqrt(2.0);
          a.step(xs);
          da.observe(a.time(), a.positions().row(0).data());
        }
        REQUIRE(a.time() < 1e5);
      }
      coarse.push_back(std::log(da.exit_time()));
      fine.push_back(std::log(db.exit_time()));
    }
    auto mean = [](const std::vector<double>& v) {
      double s = 0;
      for (double x : v) s += x;
      return s / static_cast<double>(v.size());
    };
    double var = 0;
    const double mf = mean(fine);
    for (double x : fine) var += (x - mf) * (x - mf);
    const double se = std::sqrt(var / (reps - 1) / reps);
    CAPTURE(s2);
    CHECK(std::abs(mean(coarse) - mf) < se);
  }
}
