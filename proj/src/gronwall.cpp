#include "sidlab/gronwall.hpp"

#include "sidlab/types.hpp"

#include <algorithm>
#include <cmath>

namespace sidlab {

namespace {

void check_params(double alpha, double beta, double T, double dt) {
  if (!(beta >= 0) || !(alpha > beta)) throw Error("need alpha > beta >= 0");
  if (!(dt > 0) || !(T > 0)) throw Error("need T > 0 and dt > 0");
}

std::size_t step_count(double T, double dt) {
  const double n = std::ceil(T / dt - 1e-9);
  if (n > 5e8) throw Error("too many time steps");
  return static_cast<std::size_t>(n);
}

// m_{n+1} = P + Q f_{n+1}; the running state is advanced once f_{n+1} is known
class MemoryRecurrence {
 public:
  MemoryRecurrence(const MemoryKernel& k, double dt, double f0) : k_(k), dt_(dt), fprev_(f0) {
    decay_ = k.kind == KernelKind::exponential ? std::exp(-k.rate * dt) : 1.0;
  }

  // coefficients for the next node
  void coefficients(double& P, double& Q) const {
    if (k_.kind == KernelKind::dirac) {
      P = 0;
      Q = 1;
      return;
    }
    const double base = decay_ * (num_ + 0.5 * dt_ * fprev_);
    const double z = decay_ * (den_ + 0.5 * dt_) + 0.5 * dt_;
    P = base / z;
    Q = 0.5 * dt_ / z;
  }

  void advance(double fnext) {
    num_ = decay_ * (num_ + 0.5 * dt_ * fprev_) + 0.5 * dt_ * fnext;
    den_ = decay_ * (den_ + 0.5 * dt_) + 0.5 * dt_;
    fprev_ = fnext;
  }

  double current() const { return den_ > 0 ? num_ / den_ : fprev_; }

 private:
  MemoryKernel k_;
  double dt_;
  double fprev_;
  double decay_ = 1;
  double num_ = 0;  // int e^{-eta(t-s)} f(s) ds, trapezoid
  double den_ = 0;  // same with f = 1
};

}  // namespace

Series integrate_extremal(double alpha, double beta, double gamma, const MemoryKernel& kernel,
                          double f0, double T, double dt) {
  return integrate_extremal(alpha, beta, gamma, kernel, f0, T, dt, nullptr);
}

Series integrate_extremal(double alpha, double beta, double gamma, const MemoryKernel& kernel,
                          double f0, double T, double dt, const std::function<double(double)>& h) {
  check_params(alpha, beta, T, dt);
  if (!(gamma >= 0) || !(f0 >= 0)) throw Error("need gamma >= 0 and f0 >= 0");
  const std::size_t n = step_count(T, dt);
  Series s;
  s.times.resize(n + 1);
  s.values.resize(n + 1);
  s.times[0] = 0;
  s.values[0] = f0;
  MemoryRecurrence mem(kernel, dt, f0);
  double f = f0;
  double F = -alpha * f + beta * f + gamma - (h ? h(0.0) : 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const double t1 = static_cast<double>(k + 1) * dt;
    double P, Q;
    mem.coefficients(P, Q);
    const double h1 = h ? h(t1) : 0.0;
    const double rhs = f + 0.5 * dt * F + 0.5 * dt * (beta * P + gamma - h1);
    const double lhs = 1 + 0.5 * dt * alpha - 0.5 * dt * beta * Q;
    const double fn = rhs / lhs;
    mem.advance(fn);
    F = -alpha * fn + beta * (P + Q * fn) + gamma - h1;
    f = fn;
    s.times[k + 1] = t1;
    s.values[k + 1] = fn;
  }
  return s;
}

std::vector<double> memory_average(const std::vector<double>& x, const MemoryKernel& kernel,
                                   double dt) {
  std::vector<double> out(x.size());
  if (x.empty()) return out;
  if (kernel.kind == KernelKind::dirac) return x;
  MemoryRecurrence mem(kernel, dt, x[0]);
  out[0] = x[0];
  for (std::size_t k = 1; k < x.size(); ++k) {
    mem.advance(x[k]);
    out[k] = mem.current();
  }
  return out;
}

Envelope build_envelope(double alpha, double beta, const MemoryKernel& kernel, double T, double dt,
                        std::size_t max_depth) {
  check_params(alpha, beta, T, dt);
  if (!(beta > 0)) throw Error("envelope construction needs beta > 0");
  const std::size_t n = step_count(T, dt);
  Envelope e;
  e.max_depth = max_depth;
  e.c = std::sqrt(beta / alpha);
  const double c = e.c;
  e.times.resize(n + 1);
  for (std::size_t k = 0; k <= n; ++k) e.times[k] = static_cast<double>(k) * dt;

  // x_0 = e^{-alpha t} + beta/alpha (1 - e^{-alpha t})
  std::vector<double> xn(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    const double a = std::exp(-alpha * e.times[k]);
    xn[k] = a + (beta / alpha) * (1 - a);
  }
  e.steps.push_back(0.0);
  std::vector<std::size_t> step_idx{0};
  const std::size_t one = static_cast<std::size_t>(std::llround(1.0 / dt));
  double level = c;  // c^{n+1}
  for (std::size_t depth = 0;; ++depth) {
    if (max_depth && depth >= max_depth) break;
    const std::size_t lo0 = step_idx.back() + std::max<std::size_t>(one, 1);
    if (lo0 > n) {
      e.truncated = true;
      break;
    }
    // suffix max of the memory average over the grid
    const auto m = memory_average(xn, kernel, dt);
    std::vector<double> suffix(n + 2, -1.0);
    for (std::size_t k = n + 1; k-- > 0;) suffix[k] = std::max(suffix[k + 1], m[k]);
    auto ok = [&](std::size_t k) { return xn[k] <= level && suffix[k] <= level; };
    if (!ok(n)) {
      e.truncated = true;
      break;
    }
    // predicate is monotone on [lo0, n]: bisection for the first admissible node
    std::size_t lo = lo0, hi = n;
    if (ok(lo)) hi = lo;
    while (hi - lo > 1) {
      const std::size_t mid = lo + (hi - lo) / 2;
      if (ok(mid)) hi = mid;
      else lo = mid;
    }
    const std::size_t k1 = hi;
    step_idx.push_back(k1);
    e.steps.push_back(e.times[k1]);
    // x_{n+1} = x_n before t_{n+1}, then relaxes from c^{n+1} to c^{n+3}
    const double to = level * c * c;
    for (std::size_t k = k1; k <= n; ++k) {
      const double a = std::exp(-alpha * (e.times[k] - e.times[k1]));
      xn[k] = a * level + (1 - a) * to;
    }
    level *= c;
    ++e.depth;
  }

  e.x.resize(n + 1);
  double cn = 1;
  std::size_t s = 0;
  for (std::size_t k = 0; k <= n; ++k) {
    while (s + 1 < step_idx.size() && k >= step_idx[s + 1]) {
      ++s;
      cn *= c;
    }
    e.x[k] = cn;
  }
  e.nonincreasing = std::is_sorted(e.x.rbegin(), e.x.rend());
  return e;
}

DominationReport verify_domination(const Series& f, double alpha, double beta, double gamma,
                                   const Envelope& envelope) {
  if (f.values.size() != envelope.x.size()) throw Error("series and envelope grids differ");
  for (std::size_t k = 0; k < f.times.size(); ++k)
    if (std::abs(f.times[k] - envelope.times[k]) > 1e-9 * (1 + f.times[k]))
      throw Error("series and envelope grids differ");
  DominationReport r;
  const double a = gamma / (alpha - beta);
  const double excess = std::max(0.0, f.values.front() - a);
  double fmax = 0;
  for (double v : f.values) fmax = std::max(fmax, std::abs(v));
  const double dt = f.times.size() > 1 ? f.times[1] - f.times[0] : 0.0;
  r.tolerance = 1e-8 + 5 * dt * (alpha + beta) * fmax;
  r.worst_margin = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < f.values.size(); ++k) {
    const double margin = a + envelope.x[k] * excess - f.values[k];
    r.worst_margin = std::min(r.worst_margin, margin);
    if (margin < -r.tolerance) ++r.violations;
  }
  r.ok = r.violations == 0;
  return r;
}

}  // namespace sidlab
