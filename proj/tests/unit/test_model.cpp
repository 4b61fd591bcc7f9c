#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sidlab/model.hpp"
#include "sidlab/presets.hpp"

#include <cmath>
#include <numeric>

using namespace sidlab;

namespace {
Vector v2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}
Vector v1(double a) { return Vector::Constant(1, a); }
}  // namespace

TEST_CASE("drift examples") {
  // U = |z|^2 is rho = 2 isotropic
  auto od = DriftField::overdamped(Potential::isotropic(2, 2.0, Vector::Zero(2)));
  auto g = evaluate_drift(od, v2(1, 0));
  CHECK(g[0] == doctest::Approx(-2));
  CHECK(g[1] == doctest::Approx(0));

  auto kin = DriftField::kinetic(Potential::isotropic(1, 1.0, v1(0)), 1.0);
  auto k = evaluate_drift(kin, v2(1, 1));
  CHECK(k[0] == doctest::Approx(1));
  CHECK(k[1] == doctest::Approx(-2));

  Matrix B(2, 2);
  B << 0, -1, 1, 1;
  auto gle = DriftField::generalized_langevin(Potential::isotropic(1, 1.0, v1(0)), 1.0, B);
  CHECK(evaluate_drift(gle, Vector::Zero(3)).norm() == 0);
  CHECK_THROWS_AS(evaluate_drift(gle, Vector::Zero(2)), DimensionError);
}

TEST_CASE("quadratic potential vanishes at its minimizer for every preset family") {
  for (const auto& name : preset_names()) {
    auto p = preset(name);
    if (p.model.drift.family == DriftFamily::custom_quadratic) continue;
    const Vector c = p.model.drift.potential.center;
    Vector z = Vector::Zero(p.model.dim());
    z.head(c.size()) = c;
    CHECK(evaluate_drift(p.model.drift, z).norm() < 1e-14);
  }
}

TEST_CASE("change of variable wraps the drift") {
  auto kin = DriftField::kinetic(Potential::isotropic(1, 1.0, v1(0.5)), 1.5);
  Matrix D(2, 2);
  D << 1.0, 0.2, -0.3, 1.1;
  auto w = kin.with_change_of_variable(D);
  Vector z = v2(0.3, -0.7);
  Vector expect = D.inverse() * kin(D * z);
  CHECK((w(z) - expect).norm() < 1e-13);
  CHECK((D * w.change_inv - Matrix::Identity(2, 2)).norm() < 1e-12);
  Matrix sing = Matrix::Zero(2, 2);
  sing(0, 0) = 1;
  CHECK_THROWS_AS(kin.with_change_of_variable(sing), ConfigError);
}

TEST_CASE("interaction examples") {
  const double alpha = 0.3;
  auto rep = InteractionField::quadratic_repulsive(2, alpha);
  Vector z = v2(1, 2), y = v2(-0.5, 0.25);
  auto b = evaluate_interaction(rep, z, EmpiricalMeasure::point(y));
  // convolution with W = alpha |u|^2 and A = -I: A grad W(z - y) = -2 alpha (z - y)
  auto conv = InteractionField::convolution(2, KernelShape::quadratic, alpha, 1.0, Matrix());
  auto bc = evaluate_interaction(conv, z, EmpiricalMeasure::point(y));
  CHECK((bc + 2 * alpha * (z - y)).norm() < 1e-14);
  // repulsion pushes away from the mean
  CHECK((b - 2 * alpha * (z - y)).norm() < 1e-14);

  // even kernels vanish at delta_z, exactly
  auto gau = InteractionField::gaussian_repulsion(2, 0.7, 1.3);
  CHECK(evaluate_interaction(gau, z, EmpiricalMeasure::point(z)).norm() == 0);
  CHECK(evaluate_interaction(conv, z, EmpiricalMeasure::point(z)).norm() == 0);
  auto convg = InteractionField::convolution(2, KernelShape::gaussian, 0.7, 1.3, Matrix());
  CHECK(evaluate_interaction(convg, z, EmpiricalMeasure::point(z)).norm() == 0);

  // two-point mixture equals the average of single-atom values (brute force)
  Cloud pts(2, 2);
  pts << 0.1, 0.2, -1.0, 0.5;
  EmpiricalMeasure mix(pts);
  auto bm = evaluate_interaction(gau, z, mix);
  Vector brute = Vector::Zero(2);
  for (int i = 0; i < 2; ++i) {
    Vector u = z - pts.row(i).transpose();
    // -grad of alpha exp(-beta|u|^2) wrt z is 2 alpha beta u e^{-beta |u|^2}; repulsion follows it
    brute += 0.5 * 2 * 0.7 * 1.3 * u * std::exp(-1.3 * u.squaredNorm());
  }
  CHECK((bm - brute).norm() < 1e-12);

  CHECK_THROWS(evaluate_interaction(gau, z, EmpiricalMeasure()));
}

TEST_CASE("weighted evaluation equals the weighted pairwise average") {
  Cloud pts(3, 1);
  pts << 0.0, 1.0, 2.5;
  Vector w(3);
  w << 0.2, 0.5, 0.3;
  EmpiricalMeasure mu(pts, w);
  auto gau = InteractionField::gaussian_repulsion(1, 0.4, 0.9);
  Vector z = v1(0.7);
  Vector acc = Vector::Zero(1);
  for (int i = 0; i < 3; ++i) acc += w[i] * evaluate_interaction(gau, z, EmpiricalMeasure::point(v1(pts(i, 0))));
  CHECK((evaluate_interaction(gau, z, mu) - acc).norm() < 1e-12);
}

TEST_CASE("kernel weights") {
  auto d = kernel_weights(MemoryKernel::dirac(), {0, 1, 2}, 2);
  CHECK(d == std::vector<double>{0, 0, 1});
  auto u = kernel_weights(MemoryKernel::uniform(), {0, 1, 2}, 2);
  CHECK(u[0] == doctest::Approx(0.25));
  CHECK(u[1] == doctest::Approx(0.5));
  CHECK(u[2] == doctest::Approx(0.25));
  auto one = kernel_weights(MemoryKernel::uniform(), {0}, 0);
  CHECK(one == std::vector<double>{1});
  CHECK_THROWS(kernel_weights(MemoryKernel::uniform(), {}, 1));

  // normalized, nonnegative, vanishing memory of [0, 1]
  for (auto k : {MemoryKernel::uniform(), MemoryKernel::exponential(0.5)}) {
    double prev = 1;
    for (double t : {2.0, 4.0, 8.0, 16.0, 64.0}) {
      std::vector<double> times;
      for (double s = 0; s <= t + 1e-12; s += 0.25) times.push_back(s);
      auto w = kernel_weights(k, times, t);
      double sum = 0, early = 0;
      for (std::size_t i = 0; i < w.size(); ++i) {
        CHECK(w[i] >= 0);
        sum += w[i];
        if (times[i] <= 1) early += w[i];
      }
      CHECK(std::abs(sum - 1) < 1e-12);
      CHECK(early < prev);
      prev = early;
    }
  }
}

TEST_CASE("diffusion norm is the largest singular value") {
  Matrix M(2, 2);
  M << 1, 2, 0, 3;
  DiffusionMatrix D(M);
  Eigen::JacobiSVD<Matrix> svd(M);
  CHECK(std::abs(D.norm - svd.singularValues()[0]) < 1e-10);
}

TEST_CASE("config invariants") {
  auto p = preset("overdamped-quadratic");
  auto c = p.model;
  c.declared = Dissipativity{0.5, 1.0};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = p.model;
  c.diffusion = DiffusionMatrix::scaled_identity(2, 1.0);
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("dissipativity probe: quadratic drift") {
  auto c = preset("overdamped-quadratic").model;
  Rng rng(derive_stream(3, {1}));
  auto r = probe_dissipativity(c, 2000, 2.0, rng);
  CHECK(r.rho == doctest::Approx(2.0).epsilon(0.1));
  CHECK(r.kappa <= 0.2);
  CHECK(r.violations == 0);
  CHECK(r.feasible);
}

TEST_CASE("dissipativity probe: Lipschitz interaction keeps rho above rho0 - kappa1") {
  auto c = preset("overdamped-quadratic-interacting").model;
  Rng rng(derive_stream(3, {2}));
  auto r = probe_dissipativity(c, 2000, 2.0, rng);
  // kappa1 = kappa2 = 2 alpha = 0.9 for the repulsion; with the measure shared, rate rho0 - kappa1
  CHECK(r.rho_max >= 2.0 - 0.9 - 1e-6);
  CHECK(r.kappa <= 0.9 * 0.9 + 1e-6);
  CHECK(r.rho > r.kappa);
  CHECK(r.violations == 0);
}

TEST_CASE("dissipativity probe: attractive mean field gives rho0 + alpha") {
  auto c = preset("overdamped-quadratic").model;
  c.interaction = InteractionField::quadratic_attractive(1, 0.5);
  Rng rng(derive_stream(3, {3}));
  auto r = probe_dissipativity(c, 2000, 2.0, rng);
  CHECK(r.rho_max == doctest::Approx(2.5).epsilon(0.1));
  CHECK(r.violations == 0);
}

TEST_CASE("contraction after the supplied change of variable, 1e4 pairs") {
  for (const char* name : {"kinetic-quadratic", "colored-ou", "gle-k3"}) {
    auto p = preset(name);
    auto wrapped = change_coordinates(p.model, p.change_of_variable);
    Rng rng(derive_stream(5, {std::hash<std::string>{}(name)}));
    auto r = probe_dissipativity(wrapped, 10000, 2.0, rng);
    CAPTURE(name);
    CHECK(r.rho > r.kappa);
    CHECK(r.rho > 0);
    CHECK(r.violations == 0);
    // without the change of variable the raw kinetic field does not contract
    if (std::string(name) == "kinetic-quadratic") {
      Rng rng2(7);
      auto raw = probe_dissipativity(p.model, 2000, 2.0, rng2);
      CHECK(raw.rho_max <= 1e-9);
    }
  }
}

TEST_CASE("initial laws") {
  Rng rng(11);
  auto ball = InitialLaw::ball(v2(1, -1), 0.5);
  auto s = ball.sample(500, rng);
  for (Eigen::Index i = 0; i < s.rows(); ++i) CHECK((s.row(i).transpose() - v2(1, -1)).norm() <= 0.5);
  CHECK(ball.support_radius(v2(1, -1)) == doctest::Approx(0.5));
}
