#include "sidlab/toychain.hpp"

#include "sidlab/types.hpp"

#include <boost/numeric/odeint/stepper/runge_kutta4.hpp>

#include <algorithm>
#include <array>
#include <cmath>

namespace sidlab {

namespace odeint = boost::numeric::odeint;

void ChainParams::validate() const {
  if (!(a01 > 0) || !(a10 > 0)) throw ConfigError("toychain.a", "barrier heights must be positive");
  if (!(alpha >= 0) || !(alpha < std::min(a01, a10)))
    throw ConfigError("toychain.alpha", "need 0 <= alpha < min(a01, a10)");
  if (!(sigma > 0)) throw ConfigError("toychain.sigma", "sigma must be positive");
}

double ChainParams::rate01(double x) const {
  return std::exp((alpha * (2 * x - 1) - a01) / (sigma * sigma));
}

double ChainParams::rate10(double x) const {
  return std::exp((alpha * (1 - 2 * x) - a10) / (sigma * sigma));
}

namespace {

using State = std::array<double, 1>;

struct Rhs {
  const ChainParams& p;
  void operator()(const State& s, State& ds, double) const {
    const double x = s[0];
    ds[0] = -p.rate01(x) * x + p.rate10(x) * (1 - x);
  }
};

double fastest_rate(const ChainParams& p) {
  const double s2 = p.sigma * p.sigma;
  return std::max(std::exp((p.alpha - p.a01) / s2), std::exp((p.alpha - p.a10) / s2));
}

void push(ChainPath& path, double t, double x, const ChainParams& p) {
  if (path.times.empty()) {
    path.hazard.push_back(0.0);
  } else {
    const double h = t - path.times.back();
    path.hazard.push_back(path.hazard.back() + 0.5 * h * (p.rate01(path.x.back()) + p.rate01(x)));
  }
  path.times.push_back(t);
  path.x.push_back(x);
}

}  // namespace

ChainPath occupancy_ode(const ChainParams& p, double T, double dt) {
  p.validate();
  if (!(T >= 0) || !(dt > 0)) throw Error("need T >= 0 and dt > 0");
  const auto n = static_cast<std::size_t>(std::ceil(T / dt - 1e-9));
  ChainPath path;
  odeint::runge_kutta4<State> stepper;
  Rhs rhs{p};
  State s{1.0};
  push(path, 0.0, s[0], p);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * dt;
    stepper.do_step(rhs, s, t, dt);
    push(path, static_cast<double>(k + 1) * dt, s[0], p);
  }
  return path;
}

ChainPath occupancy_until_settled(const ChainParams& p) {
  p.validate();
  const double rmax = fastest_rate(p);
  const double dt = 0.05 / rmax;
  ChainPath path;
  odeint::runge_kutta4<State> stepper;
  Rhs rhs{p};
  State s{1.0};
  push(path, 0.0, s[0], p);
  State ds;
  for (std::size_t k = 0; k < 20000000; ++k) {
    const double t = static_cast<double>(k) * dt;
    stepper.do_step(rhs, s, t, dt);
    push(path, static_cast<double>(k + 1) * dt, s[0], p);
    rhs(s, ds, 0);
    if (std::abs(ds[0]) * dt < 1e-15) return path;
  }
  throw Error("two-state occupancy did not settle");
}

double exit_survival(const ChainParams& p, double t, const ChainPath& path) {
  p.validate();
  if (path.times.empty() || t < 0) throw Error("empty path or negative time");
  if (t > path.times.back() * (1 + 1e-12)) throw Error("path too short for the requested time");
  auto it = std::upper_bound(path.times.begin(), path.times.end(), t);
  const std::size_t k = static_cast<std::size_t>(it - path.times.begin()) - 1;
  if (k + 1 >= path.times.size()) return std::exp(-path.hazard.back());
  // x is linear on the cell, the trapezoid follows
  const double t0 = path.times[k], t1 = path.times[k + 1];
  const double w = (t - t0) / (t1 - t0);
  const double xt = (1 - w) * path.x[k] + w * path.x[k + 1];
  const double H = path.hazard[k] + 0.5 * (t - t0) * (p.rate01(path.x[k]) + p.rate01(xt));
  return std::exp(-H);
}

std::vector<double> sample_exit_times(const ChainParams& p, std::size_t n, Rng& rng) {
  return sample_exit_times(p, occupancy_until_settled(p), n, rng);
}

std::vector<double> sample_exit_times(const ChainParams& p, const ChainPath& path, std::size_t n,
                                      Rng& rng) {
  p.validate();
  if (n < 1) throw Error("need at least one sample");
  const double tail = p.rate01(path.x.back());
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double e = rng.exponential();
    if (e >= path.hazard.back()) {
      out[i] = path.times.back() + (e - path.hazard.back()) / tail;
      continue;
    }
    auto it = std::upper_bound(path.hazard.begin(), path.hazard.end(), e);
    const std::size_t k = static_cast<std::size_t>(it - path.hazard.begin()) - 1;
    const double w = (e - path.hazard[k]) / (path.hazard[k + 1] - path.hazard[k]);
    out[i] = path.times[k] + w * (path.times[k + 1] - path.times[k]);
  }
  return out;
}

SpreadTable exponent_spread(const ChainParams& p, const std::vector<double>& sigma_grid,
                            std::size_t n_per_sigma, const std::vector<double>& centers, double delta,
                            std::uint64_t seed) {
  if (!p.symmetric()) throw Error("exponent spread is defined for a01 = a10");
  if (!(delta > 0)) throw Error("window half-width must be positive");
  SpreadTable tab;
  tab.sigma = sigma_grid;
  tab.centers = centers;
  tab.delta = delta;
  const double a = p.a01;
  for (std::size_t j = 0; j < sigma_grid.size(); ++j) {
    ChainParams q = p;
    q.sigma = sigma_grid[j];
    Rng rng(derive_stream(seed, {static_cast<std::uint64_t>(Purpose::sampler), j}));
    const auto tau = sample_exit_times(q, n_per_sigma, rng);
    const double s2 = q.sigma * q.sigma;
    std::vector<double> ex(tau.size());
    for (std::size_t i = 0; i < tau.size(); ++i) ex[i] = s2 * std::log(tau[i]);
    std::vector<double> m(centers.size(), 0.0);
    double out = 0;
    for (double e : ex) {
      for (std::size_t c = 0; c < centers.size(); ++c)
        if (std::abs(e - centers[c]) < delta) m[c] += 1;
      if (e < a - p.alpha - delta || e > a + delta) out += 1;
    }
    for (double& v : m) v /= static_cast<double>(ex.size());
    tab.mass.push_back(m);
    tab.outside.push_back(out / static_cast<double>(ex.size()));
    tab.exponents.push_back(std::move(ex));
  }
  return tab;
}

}  // namespace sidlab
