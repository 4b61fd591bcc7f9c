// Acceptance suite: one PASS/FAIL line per criterion, tolerances fixed below.
// Exit status is the number of failed criteria (capped at 100).

#include "sidlab/engine.hpp"
#include "sidlab/exits.hpp"
#include "sidlab/fixedpoint.hpp"
#include "sidlab/gronwall.hpp"
#include "sidlab/measure.hpp"
#include "sidlab/model.hpp"
#include "sidlab/presets.hpp"
#include "sidlab/quasipotential.hpp"
#include "sidlab/toychain.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

using namespace sidlab;

namespace {

// ---- pinned tolerances and sizes ----
constexpr double kL_lo = 0.85, kL_hi = 1.15;      // crit 1
constexpr double kH_lo = 0.47, kH_hi = 0.63;      // crit 2
constexpr std::size_t kReplicasL = 4000;          // crit 1
constexpr double kDtL = 1e-3;
constexpr std::size_t kReplicasH = 2000;          // crit 2, 3, 4, 13
constexpr double kDtH = 0.01;
constexpr std::size_t kParticles = 256;
constexpr std::size_t kParticlesDoubled = 512;
constexpr double kFlowTol = 1e-6;                 // crit 5
constexpr std::size_t kFlowPairs = 100;
constexpr double kFlowT = 3.0;
constexpr double kStationarySE = 3.0;             // crit 6, multiples of the MC standard error
constexpr std::size_t kCoupledRuns = 50;          // crit 7
constexpr std::size_t kGronwallDraws = 100;       // crit 8
constexpr double kDiracEnvelopeTol = 1e-6;
constexpr double kPowerSlopeTol = 0.1;
constexpr double kChainMass = 0.02;               // crit 9
constexpr double kControlMass = 0.95;
constexpr std::size_t kChainDraws = 10000;
constexpr std::size_t kW2Instances = 200;         // crit 10
constexpr double kW2Tol = 1e-9;
constexpr double kActionAbove = 0.05;             // crit 11, relative
constexpr double kActionBelow = 1e-3;             // absolute
constexpr double kResidual = 1e-10;               // crit 12
constexpr double kRatioSlack = 0.05;

constexpr std::uint64_t kSeed = 20240611;

struct Line {
  int id;
  std::string name;
  bool pass;
  std::string detail;
  double seconds;
};

std::vector<Line> lines;

void criterion(int id, const std::string& name, const std::function<bool(std::ostringstream&)>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  std::ostringstream detail;
  bool ok = false;
  try {
    ok = body(detail);
  } catch (const std::exception& e) {
    detail << " exception: " << e.what();
    ok = false;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  lines.push_back({id, name, ok, detail.str(), secs});
  std::printf("%s %2d %-34s %s (%.1fs)\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.str().c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(double x, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", prec, x);
  return buf;
}

std::string ci(const KramersFit& f) {
  return fmt(f.barrier) + " [" + fmt(f.barrier_lo) + ", " + fmt(f.barrier_hi) + "]";
}

double joint_half_width(const KramersFit& a, const KramersFit& b) {
  return std::sqrt(a.barrier_half_width() * a.barrier_half_width() +
                   b.barrier_half_width() * b.barrier_half_width());
}

std::vector<double> sqrt_all(std::vector<double> v) {
  for (double& x : v) x = std::sqrt(x);
  return v;
}

ExitCampaignResult interacting_campaign(const MemoryKernel& kernel, CampaignMode mode, std::size_t particles) {
  auto p = preset("overdamped-quadratic-interacting");
  CampaignOptions o;
  o.sigma = default_sigma_grid(*p.predicted_H, 4, p.model.theta());
  o.replicas = kReplicasH;
  o.mode = mode;
  o.predicted_H = p.predicted_H;
  o.settings.dt = kDtH;
  o.settings.particles = particles;
  o.settings.seed = kSeed;
  auto r = run_campaign(p.model.with_kernel(kernel), p.domain, o);
  if (!r.fit) throw Error("no fit: " + r.fit_error);
  return r;
}

// campaigns shared between criteria
std::optional<KramersFit> fit_L, fit_H, fit_frozen, fit_uniform, fit_512;

}  // namespace

int main() {
  std::printf("sidlab acceptance, seed %llu\n", static_cast<unsigned long long>(kSeed));

  criterion(1, "kramers-exponent-noninteracting", [](std::ostringstream& d) {
    auto p = preset("overdamped-quadratic");
    CampaignOptions o;
    o.sigma = sqrt_all({0.5, 0.6, 0.75, 1.0});
    o.replicas = kReplicasL;
    o.predicted_H = p.predicted_H;
    o.settings.dt = kDtL;
    o.settings.particles = 1;
    o.settings.seed = kSeed;
    auto r = run_campaign(p.model, p.domain, o);
    if (!r.fit) throw Error("no fit: " + r.fit_error);
    fit_L = *r.fit;
    d << "L_hat " << ci(*r.fit) << " want [" << kL_lo << ", " << kL_hi << "]";
    return r.fit->barrier >= kL_lo && r.fit->barrier <= kL_hi;
  });

  criterion(2, "kramers-exponent-interacting", [](std::ostringstream& d) {
    auto r = interacting_campaign(MemoryKernel::dirac(), CampaignMode::tagged, kParticles);
    fit_H = *r.fit;
    d << "H_hat " << ci(*r.fit) << " want [" << kH_lo << ", " << kH_hi << "]";
    bool ok = r.fit->barrier >= kH_lo && r.fit->barrier <= kH_hi;
    if (fit_L) {
      d << ", CI separation from L_hat: hi " << fmt(r.fit->barrier_hi) << " < lo " << fmt(fit_L->barrier_lo);
      ok = ok && r.fit->barrier < fit_L->barrier && r.fit->barrier_hi < fit_L->barrier_lo;
    } else {
      d << ", L_hat missing";
      ok = false;
    }
    return ok;
  });

  criterion(3, "frozen-linear-equivalence", [](std::ostringstream& d) {
    auto r = interacting_campaign(MemoryKernel::dirac(), CampaignMode::frozen, kParticles);
    fit_frozen = *r.fit;
    d << "H_frozen " << ci(*r.fit);
    if (!fit_H) return false;
    const double diff = std::abs(r.fit->barrier - fit_H->barrier), jw = joint_half_width(*r.fit, *fit_H);
    d << ", |diff| " << fmt(diff) << " <= joint half-width " << fmt(jw);
    return diff <= jw;
  });

  criterion(4, "memory-kernel-insensitivity", [](std::ostringstream& d) {
    auto r = interacting_campaign(MemoryKernel::uniform(), CampaignMode::tagged, kParticles);
    fit_uniform = *r.fit;
    d << "H_uniform " << ci(*r.fit);
    if (!fit_H) return false;
    const double diff = std::abs(r.fit->barrier - fit_H->barrier), jw = joint_half_width(*r.fit, *fit_H);
    d << ", |diff| " << fmt(diff) << " <= joint half-width " << fmt(jw);
    return diff <= jw;
  });

  criterion(5, "flow-contraction", [](std::ostringstream& d) {
    auto p = preset("overdamped-quadratic");
    const double rho = p.model.declared->rho;
    const Vector lambda = find_lambda(p.model).lambda;
    Rng rng(derive_stream(kSeed, {static_cast<std::uint64_t>(Purpose::suite), 5}));
    double worst = 0;
    for (std::size_t k = 0; k < kFlowPairs; ++k) {
      Vector z = Vector::Constant(1, 4 * rng.uniform() - 2), y = Vector::Constant(1, 4 * rng.uniform() - 2);
      if ((z - y).norm() < 1e-6) continue;
      const Vector a = deterministic_flow(p.model, lambda, z, kFlowT, 1e-3).end();
      const Vector b = deterministic_flow(p.model, lambda, y, kFlowT, 1e-3).end();
      worst = std::max(worst, (a - b).norm() / (std::exp(-rho * kFlowT) * (z - y).norm()));
    }
    d << "max ratio " << fmt(worst, 10) << " over " << kFlowPairs << " pairs, want <= 1 + " << kFlowTol;
    return worst <= 1 + kFlowTol;
  });

  criterion(6, "stationary-second-moment", [](std::ostringstream& d) {
    auto p = preset("overdamped-quadratic-interacting");
    Rng prng(derive_stream(kSeed, {static_cast<std::uint64_t>(Purpose::probe), 6}));
    auto probe = probe_dissipativity(p.model, 10000, 2.0, prng);
    const Vector lambda = find_lambda(p.model).lambda;
    const double gap = probe.rho - probe.kappa;
    d << "rho_hat " << fmt(probe.rho) << " kappa_hat " << fmt(probe.kappa) << ";";
    bool ok = gap > 0;
    for (double s : {0.05, 0.1, 0.2}) {
      IntegratorSettings st;
      st.dt = 1e-3;
      st.horizon = 40;
      st.particles = kParticles;
      st.seed = kSeed;
      auto est = stationary_second_moment(p.model.with_sigma(s), lambda, st, 5.0, 20);
      const double bound = p.model.dim() * p.model.diffusion.norm * p.model.diffusion.norm * s * s / (2 * gap) +
                           kStationarySE * est.std_error;
      d << " s=" << s << ": " << fmt(est.mean) << " <= " << fmt(bound);
      ok = ok && est.mean <= bound;
    }
    return ok;
  });

  criterion(7, "parallel-coupling", [](std::ostringstream& d) {
    auto p = preset("overdamped-quadratic-interacting");
    Rng prng(derive_stream(kSeed, {static_cast<std::uint64_t>(Purpose::probe), 7}));
    auto probe = probe_dissipativity(p.model, 10000, 2.0, prng);
    const Vector lambda = find_lambda(p.model).lambda;
    Rng rng(derive_stream(kSeed, {static_cast<std::uint64_t>(Purpose::suite), 7}));
    std::size_t c1 = 0, v1 = 0, c2 = 0, v2 = 0;
    for (std::size_t run = 0; run < kCoupledRuns; ++run) {
      IntegratorSettings st;
      st.dt = 1e-2;
      st.horizon = 3;
      st.particles = 32;
      st.seed = kSeed + run;
      CouplingOptions o;
      o.rho = probe.rho;
      o.kappa = probe.kappa;
      o.replica = run;
      Cloud a(32, 1), b(32, 1);
      for (Eigen::Index i = 0; i < 32; ++i) {
        a(i, 0) = 1.6 * rng.uniform() - 0.8;
        b(i, 0) = 1.6 * rng.uniform() - 0.8;
      }
      o.initial_a = a;
      o.initial_b = b;
      // item 1: same noise level on both sides
      auto same = parallel_couple(p.model, p.model, st, o);
      c1 += same.item1_checks;
      v1 += same.item1_violations;
      // item 2: deterministic frozen partner at lambda
      CouplingOptions f = o;
      f.initial_b.reset();
      f.frozen_b = lambda;
      auto frozen = parallel_couple(p.model, p.model.with_sigma(0.0), st, f);
      c2 += frozen.item2_checks;
      v2 += frozen.item2_violations;
    }
    d << "item 1: " << v1 << "/" << c1 << " violations, item 2: " << v2 << "/" << c2;
    return c1 > 0 && c2 > 0 && v1 == 0 && v2 == 0;
  });

  criterion(8, "memory-gronwall-suite", [](std::ostringstream& d) {
    Rng rng(derive_stream(kSeed, {static_cast<std::uint64_t>(Purpose::suite), 8}));
    std::size_t dominated = 0, total = 0, dirac_ok = 0, dirac_total = 0, slope_ok = 0;
    double worst_dirac = 0, worst_slope = 0;
    for (std::size_t k = 0; k < kGronwallDraws; ++k) {
      const double alpha = 0.5 + 2.5 * rng.uniform();
      const double beta = alpha * (0.05 + 0.9 * rng.uniform());
      const double gamma = rng.uniform();
      const double f0 = 0.1 + 2 * rng.uniform();
      const double eta = 0.2 + 3 * rng.uniform();
      for (auto kernel : {MemoryKernel::dirac(), MemoryKernel::uniform(), MemoryKernel::exponential(eta)}) {
        const double T = 20, dt = 1e-3;
        auto f = integrate_extremal(alpha, beta, gamma, kernel, f0, T, dt);
        auto env = build_envelope(alpha, beta, kernel, T, dt);
        ++total;
        if (verify_domination(f, alpha, beta, gamma, env).ok) ++dominated;
        if (kernel.kind == KernelKind::dirac) {
          // extremal solution with f0 = 1, gamma = 0 is the exponential; the envelope sits above it
          auto unit = integrate_extremal(alpha, beta, 0.0, kernel, 1.0, T, dt);
          double err = 0, below = 0;
          for (std::size_t i = 0; i < unit.times.size(); ++i) {
            const double e = std::exp(-(alpha - beta) * unit.times[i]);
            err = std::max(err, std::abs(unit.values[i] - e));
            below = std::max(below, e - env.x[i]);
          }
          worst_dirac = std::max(worst_dirac, err);
          ++dirac_total;
          if (err <= kDiracEnvelopeTol && below <= kDiracEnvelopeTol) ++dirac_ok;
        }
        if (kernel.kind == KernelKind::uniform) {
          const double Tl = 400, dtl = 0.01;
          auto u = integrate_extremal(alpha, beta, 0.0, kernel, 1.0, Tl, dtl);
          auto at = [&](double t) { return u.values[static_cast<std::size_t>(std::llround(t / dtl))]; };
          const double slope = std::log(at(400) / at(200)) / std::log(2.0);
          const double err = std::abs(slope - (beta / alpha - 1));
          worst_slope = std::max(worst_slope, err);
          if (err <= kPowerSlopeTol) ++slope_ok;
        }
      }
    }
    d << "dominated " << dominated << "/" << total << ", dirac " << dirac_ok << "/" << dirac_total
      << " (max err " << fmt(worst_dirac) << "), uniform slope " << slope_ok << "/" << kGronwallDraws
      << " (max err " << fmt(worst_slope) << ")";
    return dominated == total && dirac_ok == dirac_total && slope_ok == kGronwallDraws;
  });

  criterion(9, "toy-chain-exponent-spread", [](std::ostringstream& d) {
    ChainParams p;
    p.a01 = p.a10 = 1.0;
    p.alpha = 0.4;
    const std::vector<double> s2 = {0.2, 0.14, 0.1, 0.08};
    auto tab = exponent_spread(p, sqrt_all(s2), kChainDraws, {0.7, 0.9}, 0.1, kSeed);
    const auto& last = tab.mass.back();
    d << "sigma^2=0.08 masses " << fmt(last[0]) << ", " << fmt(last[1]);
    bool ok = last[0] > kChainMass && last[1] > kChainMass;
    // control: at sigma^2 = 0.08 the alpha = 0 window holds only about 0.72, so the
    // concentration is checked further down the grid and the 0.08 value is reported
    ChainParams c = p;
    c.alpha = 0.0;
    const std::vector<double> cs2 = {0.08, 0.05, 0.035, 0.025};
    auto ctl = exponent_spread(c, sqrt_all(cs2), kChainDraws, {1.0}, 0.1, kSeed);
    d << "; alpha=0 window mass " << fmt(ctl.mass.front()[0]) << " at 0.08, " << fmt(ctl.mass.back()[0])
      << " at 0.025";
    return ok && ctl.mass.back()[0] > kControlMass;
  });

  criterion(10, "w2-oracle-equivalence", [](std::ostringstream& d) {
    Rng rng(derive_stream(kSeed, {static_cast<std::uint64_t>(Purpose::suite), 10}));
    double worst_1d = 0, worst_match = 0, worst_mix = 0;
    for (std::size_t k = 0; k < kW2Instances; ++k) {
      const int n = 1 + static_cast<int>(rng.uniform() * 64);
      const int dim = k % 2 == 0 ? 1 : 2 + static_cast<int>(k % 3);
      auto cloud = [&](int rows) {
        Cloud c(rows, dim);
        for (int i = 0; i < rows; ++i)
          for (int j = 0; j < dim; ++j) c(i, j) = rng.normal() * (1 + j);
        return c;
      };
      EmpiricalMeasure a(cloud(n)), b(cloud(n));
      const double exact = w2_exact_small(a, b);
      if (dim == 1) worst_1d = std::max(worst_1d, std::abs(w2_1d(a, b) - exact));
      worst_match = std::max(worst_match, exact - w2_matched(a, b));
      // mixture inequality over three aligned snapshots with uniform kernel weights
      const int m = std::max(1, n / 4);
      SnapshotStore sa(8), sb(8);
      std::vector<double> pair;
      for (int s = 0; s < 3; ++s) {
        EmpiricalMeasure x(cloud(m)), y(cloud(m));
        sa.push(s, x);
        sb.push(s, y);
        const double w = w2_exact_small(x, y);
        pair.push_back(w * w);
      }
      auto w = kernel_weights(MemoryKernel::uniform(), sa.times(), 2.0);
      double rhs = 0;
      for (int s = 0; s < 3; ++s) rhs += w[s] * pair[s];
      const double lhs = std::pow(w2_exact_small(mixture(sa, MemoryKernel::uniform(), 2.0),
                                                 mixture(sb, MemoryKernel::uniform(), 2.0)),
                                  2);
      worst_mix = std::max(worst_mix, lhs - rhs);
    }
    d << "max |1d - exact| " << fmt(worst_1d) << ", max exact - matched " << fmt(worst_match)
      << ", max mixture excess " << fmt(worst_mix);
    return worst_1d <= kW2Tol && worst_match <= kW2Tol && worst_mix <= kW2Tol;
  });

  criterion(11, "quasipotential-consistency", [](std::ostringstream& d) {
    // two-dimensional version of the interacting quadratic preset: 8 distinct boundary targets
    auto c = preset("overdamped-quadratic-interacting").model;
    c.drift = DriftField::overdamped(Potential::isotropic(2, 2.0, Vector::Zero(2)));
    c.interaction = InteractionField::quadratic_repulsive(2, 0.45);
    c.diffusion = DiffusionMatrix::scaled_identity(2, std::sqrt(2.0));
    c.init = InitialLaw::point(Vector::Zero(2));
    const Vector lambda = find_lambda(c).lambda;
    const auto domain = Domain::ball(Vector::Zero(2), 1.0);
    const double H = elliptic_H(c, lambda, domain);
    double lo = 1e300, hi = -1e300;
    bool ok = true;
    for (int k = 0; k < 8; ++k) {
      Vector target(2);
      target << std::cos(M_PI * k / 4 + 0.1), std::sin(M_PI * k / 4 + 0.1);
      auto r = minimize_action(c, lambda, target);
      lo = std::min(lo, r.value);
      hi = std::max(hi, r.value);
      ok = ok && r.value <= H * (1 + kActionAbove) && r.value >= H - kActionBelow;
    }
    d << "elliptic H " << fmt(H, 6) << ", actions in [" << fmt(lo, 6) << ", " << fmt(hi, 6) << "]";
    return ok;
  });

  criterion(12, "fixed-point", [](std::ostringstream& d) {
    double worst_res = 0;
    bool ok = true;
    for (const auto& name : preset_names()) {
      auto p = preset(name);
      auto plain = find_lambda(p.model);
      const double res = lambda_residual(p.model, plain.lambda);
      worst_res = std::max(worst_res, res);
      // contraction estimated from a far start; the probe runs in the supplied coordinates
      FixedPointOptions o;
      o.start = plain.lambda + Vector::Constant(p.model.dim(), 3.0);
      auto far = find_lambda(p.model, o);
      const ModelConfig probed = p.change_of_variable.size() > 0 ? change_coordinates(p.model, p.change_of_variable)
                                                                  : p.model;
      Rng rng(derive_stream(kSeed, {static_cast<std::uint64_t>(Purpose::probe), 12}));
      auto probe = probe_dissipativity(probed, 10000, 2.0, rng);
      const double bound = std::sqrt(std::max(0.0, probe.kappa) / probe.rho) + kRatioSlack;
      const double ratio = far.contraction_ratio();
      const bool good = res <= kResidual && far.converged && ratio <= bound;
      if (!good) d << " " << name << ": residual " << fmt(res) << " ratio " << fmt(ratio) << " > " << fmt(bound) << ";";
      ok = ok && good;
    }
    d << " max residual " << fmt(worst_res) << " over " << preset_names().size() << " presets";
    return ok;
  });

  criterion(13, "mean-field-proxy-doubling", [](std::ostringstream& d) {
    auto r = interacting_campaign(MemoryKernel::dirac(), CampaignMode::tagged, kParticlesDoubled);
    fit_512 = *r.fit;
    d << "H_512 " << ci(*r.fit);
    if (!fit_H) return false;
    const double diff = std::abs(r.fit->barrier - fit_H->barrier);
    d << ", |H_512 - H_256| " << fmt(diff) << " < half-width " << fmt(fit_H->barrier_half_width());
    return diff < fit_H->barrier_half_width();
  });

  int failed = 0;
  for (const auto& l : lines) failed += !l.pass;
  std::printf("summary: %zu criteria, %d failed\n", lines.size(), failed);
  return std::min(failed, 100);
}
