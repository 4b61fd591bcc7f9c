#include "sidlab/exits.hpp"

#include "sidlab/config_io.hpp"
#include "sidlab/fixedpoint.hpp"
#include "sidlab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sidlab {

std::string to_string(DomainKind k) {
  switch (k) {
    case DomainKind::ball: return "ball";
    case DomainKind::product: return "product";
    case DomainKind::halfspaces: return "halfspaces";
  }
  return "?";
}

Domain Domain::ball(const Vector& c, double r) {
  if (!(r > 0)) throw ConfigError("domain.radius", "radius must be positive");
  Domain d;
  d.kind = DomainKind::ball;
  d.dim = static_cast<int>(c.size());
  d.center = c;
  d.radius = r;
  return d;
}

Domain Domain::product(const Vector& position_center, double r, int total_dim) {
  if (!(r > 0)) throw ConfigError("domain.radius", "radius must be positive");
  if (total_dim < position_center.size()) throw ConfigError("domain.dim", "too small for the position block");
  Domain d;
  d.kind = DomainKind::product;
  d.dim = total_dim;
  d.center = position_center;
  d.radius = r;
  return d;
}

Domain Domain::halfspaces(const Matrix& N, const Vector& b, const Vector& reference) {
  require_dim(b.size(), N.rows(), "halfspace offsets");
  require_dim(reference.size(), N.cols(), "halfspace reference");
  Domain d;
  d.kind = DomainKind::halfspaces;
  d.dim = static_cast<int>(N.cols());
  d.normals = N;
  d.offsets = b;
  for (Eigen::Index k = 0; k < N.rows(); ++k) {
    double n = N.row(k).norm();
    if (!(n > 0)) throw ConfigError("domain.normals", "zero normal");
    d.normals.row(k) /= n;
    d.offsets[k] /= n;
  }
  d.center = reference;
  if (!(d.signed_distance(reference) < 0))
    throw ConfigError("domain.reference", "reference point is not inside the domain");
  return d;
}

double Domain::signed_distance(const double* z) const {
  switch (kind) {
    case DomainKind::ball:
    case DomainKind::product: {
      double s = 0;
      for (Eigen::Index i = 0; i < center.size(); ++i) {
        double u = z[i] - center[i];
        s += u * u;
      }
      return std::sqrt(s) - radius;
    }
    case DomainKind::halfspaces: {
      double m = -1e300;
      for (Eigen::Index k = 0; k < normals.rows(); ++k) {
        double s = -offsets[k];
        for (int i = 0; i < dim; ++i) s += normals(k, i) * z[i];
        m = std::max(m, s);
      }
      return m;
    }
  }
  return 0;
}

double Domain::signed_distance(const Vector& z) const {
  require_dim(z.size(), dim, "domain point");
  return signed_distance(z.data());
}

Domain Domain::inflated(double xi) const {
  Domain d = *this;
  d.inflation += xi;
  if (kind == DomainKind::halfspaces) {
    d.offsets.array() += xi;
  } else {
    d.radius += xi;
    if (!(d.radius > 0)) throw Error("domain deflated to nothing");
  }
  return d;
}

double Domain::inradius() const {
  if (kind == DomainKind::halfspaces) return -signed_distance(center);
  return radius;
}

std::pair<Domain, Domain> nested_domains(const Domain& domain, double xi) {
  if (!(xi >= 0)) throw Error("nested_domains: xi must be >= 0");
  if (!(xi < domain.inradius())) throw Error("nested_domains: xi must be smaller than the inradius");
  return {domain.inflated(-xi), domain.inflated(xi)};
}

ExitDetector::ExitDetector(const Domain& domain, double t0, const double* z0)
    : domain_(&domain), prev_t_(t0), prev_sd_(domain.signed_distance(z0)) {
  if (!(prev_sd_ < 0)) throw Error("first_exit: trajectory starts outside the domain");
}

bool ExitDetector::observe(double t, const double* z) {
  if (exited_) return true;
  const double sd = domain_->signed_distance(z);
  if (sd >= 0) {
    exited_ = true;
    time_ = prev_t_ + (t - prev_t_) * (-prev_sd_) / (sd - prev_sd_);
    return true;
  }
  prev_t_ = t;
  prev_sd_ = sd;
  return false;
}

ExitResult first_exit(const std::vector<double>& times, const Cloud& path, const Domain& domain) {
  if (times.empty()) throw Error("first_exit: empty trajectory");
  require_dim(path.rows(), static_cast<Eigen::Index>(times.size()), "trajectory length");
  require_dim(path.cols(), domain.dim, "trajectory state");
  ExitDetector det(domain, times[0], path.row(0).data());
  for (std::size_t k = 1; k < times.size(); ++k)
    if (det.observe(times[k], path.row(k).data())) return {det.exit_time(), false};
  return {times.back(), true};
}

// ---- campaigns ----

std::string to_string(CampaignMode m) {
  switch (m) {
    case CampaignMode::tagged: return "tagged";
    case CampaignMode::frozen: return "frozen";
    case CampaignMode::all_particles: return "all-particles";
  }
  return "?";
}

CampaignMode campaign_mode_from_string(const std::string& s) {
  if (s == "tagged") return CampaignMode::tagged;
  if (s == "frozen") return CampaignMode::frozen;
  if (s == "all-particles") return CampaignMode::all_particles;
  throw ConfigError("campaign.mode", "unknown mode '" + s + "'");
}

std::size_t SigmaSamples::censored_count() const {
  return static_cast<std::size_t>(std::count(censored.begin(), censored.end(), 1));
}

double SigmaSamples::censored_fraction() const {
  return tau.empty() ? 0.0 : static_cast<double>(censored_count()) / static_cast<double>(tau.size());
}

KramersFit kramers_fit(const std::vector<SigmaSamples>& samples, double theta,
                       std::size_t min_uncensored) {
  KramersFit fit;
  fit.theta = theta;
  std::vector<std::size_t> use;
  for (std::size_t j = 0; j < samples.size(); ++j) {
    const auto& s = samples[j];
    SigmaFitPoint p;
    p.sigma = s.sigma;
    p.x = 1.0 / (s.sigma * s.sigma);
    double sum = 0, sum2 = 0;
    for (std::size_t i = 0; i < s.tau.size(); ++i) {
      if (s.censored[i]) {
        ++p.censored;
        continue;
      }
      double l = std::log(s.tau[i]);
      sum += l;
      sum2 += l * l;
      ++p.used;
    }
    if (p.used > 0) {
      p.mean_log = sum / static_cast<double>(p.used);
      if (p.used > 1) {
        double var = (sum2 - p.used * p.mean_log * p.mean_log) / static_cast<double>(p.used - 1);
        p.se = std::sqrt(std::max(0.0, var) / static_cast<double>(p.used));
      }
    }
    p.usable = s.sigma > 0 && p.used >= min_uncensored && s.censored_fraction() <= 0.5;
    if (p.usable) use.push_back(j);
    fit.points.push_back(p);
  }
  if (use.size() < 3)
    throw InsufficientDataError("kramers_fit: need at least 3 usable sigma points, have " +
                                std::to_string(use.size()));
  double xbar = 0, ybar = 0;
  for (auto j : use) {
    xbar += fit.points[j].x;
    ybar += fit.points[j].mean_log;
  }
  xbar /= static_cast<double>(use.size());
  ybar /= static_cast<double>(use.size());
  double sxx = 0;
  for (auto j : use) sxx += (fit.points[j].x - xbar) * (fit.points[j].x - xbar);
  if (!(sxx > 0)) throw InsufficientDataError("kramers_fit: sigma points coincide");
  double slope = 0, var = 0;
  for (auto j : use) {
    double c = (fit.points[j].x - xbar) / sxx;
    slope += c * fit.points[j].mean_log;
    var += c * c * fit.points[j].se * fit.points[j].se;
  }
  fit.slope = slope;
  fit.intercept = ybar - slope * xbar;
  fit.slope_se = std::sqrt(var);
  fit.slope_lo = slope - 1.96 * fit.slope_se;
  fit.slope_hi = slope + 1.96 * fit.slope_se;
  fit.barrier = theta * slope;
  fit.barrier_lo = theta * fit.slope_lo;
  fit.barrier_hi = theta * fit.slope_hi;
  return fit;
}

std::vector<double> default_sigma_grid(double predicted_H, std::size_t points, double theta) {
  if (!(predicted_H > 0) || points < 3) throw Error("default_sigma_grid: need H > 0 and >= 3 points");
  // exponent H/(theta sigma^2) from 4 down to 1.2, equally spaced
  std::vector<double> out;
  for (std::size_t k = 0; k < points; ++k) {
    double e = 4.0 + (1.2 - 4.0) * static_cast<double>(k) / static_cast<double>(points - 1);
    out.push_back(std::sqrt(predicted_H / (theta * e)));
  }
  return out;
}

ExitCampaignResult run_campaign(const ModelConfig& config, const Domain& domain,
                                const CampaignOptions& opts) {
  config.validate();
  opts.settings.validate();
  require_dim(domain.dim, config.dim(), "campaign domain");
  if (opts.sigma.size() < 3) throw Error("run_campaign: sigma grid needs at least 3 points");
  if (opts.replicas < 1) throw Error("run_campaign: need at least one replica");
  for (double s : opts.sigma) {
    if (!(s > 0)) throw Error("run_campaign: sigma values must be positive");
    if (!opts.allow_coarse_dt && opts.settings.dt > s * s / 10)
      throw ConfigError("integrator.dt", "exit campaigns need dt <= sigma^2/10 (or allow_coarse_dt)");
  }

  ExitCampaignResult res;
  res.model = config.name;
  res.model_hash = model_hash(config);
  res.seed = opts.settings.seed;
  res.mode = opts.mode;
  res.settings = opts.settings;
  res.theta = config.theta();
  res.predicted_H = opts.predicted_H;
  res.lambda = opts.lambda ? *opts.lambda : find_lambda(config).lambda;
  if (!domain.contains(res.lambda)) throw Error("run_campaign: lambda is not inside the domain");
  if (config.init.kind != InitKind::empirical &&
      !(domain.signed_distance(config.init.center) + config.init.radius < 0))
    throw Error("run_campaign: initial support is not inside the domain");

  const std::size_t ns = opts.sigma.size(), nr = opts.replicas;
  const std::size_t n = opts.mode == CampaignMode::frozen ? 1 : opts.settings.particles;
  const std::size_t per = opts.mode == CampaignMode::all_particles ? n : 1;
  res.samples.resize(ns);
  for (std::size_t j = 0; j < ns; ++j) {
    auto& s = res.samples[j];
    s.sigma = opts.sigma[j];
    s.horizon = opts.predicted_H
                    ? opts.horizon_multiplier *
                          std::exp(*opts.predicted_H / (res.theta * s.sigma * s.sigma))
                    : opts.fallback_horizon;
    s.tau.assign(nr * per, 0.0);
    s.censored.assign(nr * per, 0);
  }

  IntegratorSettings settings = opts.settings;
  settings.summary_snapshots = true;
  settings.particles = n;

  // smallest sigma first: longest tasks start early
  std::vector<std::size_t> order(ns);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return opts.sigma[a] < opts.sigma[b]; });

  parallel_for(ns * nr, opts.workers, [&](std::size_t task) {
    const std::size_t j = order[task / nr], r = task % nr;
    auto& out = res.samples[j];
    const ModelConfig cfg = config.with_sigma(opts.sigma[j]);
    Rng ir = init_rng(settings.seed, j, r);
    Cloud x0 = config.init.sample(static_cast<Eigen::Index>(opts.settings.particles), ir);
    if (opts.mode == CampaignMode::frozen) x0 = x0.topRows(1).eval();
    ParticleSystem sys(cfg, settings, x0);
    if (opts.mode == CampaignMode::frozen) sys.freeze_at(res.lambda);
    NoiseSource noise(settings.seed, j, r, n);
    const auto max_steps = static_cast<std::size_t>(std::ceil(out.horizon / settings.dt));

    std::vector<ExitDetector> det;
    det.reserve(per);
    for (std::size_t p = 0; p < per; ++p) det.emplace_back(domain, 0.0, sys.positions().row(p).data());
    std::size_t live = per;
    for (std::size_t k = 0; k < max_steps && live > 0; ++k) {
      sys.step(noise);
      for (std::size_t p = 0; p < per; ++p) {
        if (det[p].exited()) continue;
        if (det[p].observe(sys.time(), sys.positions().row(p).data())) --live;
      }
    }
    for (std::size_t p = 0; p < per; ++p) {
      const std::size_t slot = r * per + p;
      if (det[p].exited()) {
        out.tau[slot] = det[p].exit_time();
      } else {
        out.tau[slot] = sys.time();
        out.censored[slot] = 1;
      }
    }
  });

  try {
    res.fit = kramers_fit(res.samples, res.theta, opts.min_uncensored);
  } catch (const InsufficientDataError& e) {
    res.fit_error = e.what();
  }
  return res;
}

double mann_whitney_less(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) throw Error("mann_whitney_less: empty sample");
  const std::size_t na = a.size(), nb = b.size(), n = na + nb;
  std::vector<std::pair<double, int>> all;
  all.reserve(n);
  for (double x : a) all.push_back({x, 0});
  for (double x : b) all.push_back({x, 1});
  std::sort(all.begin(), all.end());
  double rank_a = 0, tie_term = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && all[j].first == all[i].first) ++j;
    const double avg = 0.5 * static_cast<double>(i + 1 + j);
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    for (std::size_t k = i; k < j; ++k)
      if (all[k].second == 0) rank_a += avg;
    i = j;
  }
  const double u = rank_a - 0.5 * static_cast<double>(na) * static_cast<double>(na + 1);
  const double mean = 0.5 * static_cast<double>(na) * static_cast<double>(nb);
  const double dn = static_cast<double>(n);
  const double var = static_cast<double>(na) * static_cast<double>(nb) / 12.0 *
                     ((dn + 1) - tie_term / (dn * (dn - 1)));
  if (!(var > 0)) return 0.5;
  const double z = (u + 0.5 - mean) / std::sqrt(var);  // continuity correction
  return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

InvarianceReport deterministic_invariance_check(const ModelConfig& config, const Domain& domain,
                                                double T, const IntegratorSettings& settings) {
  if (config.sigma != 0) throw Error("deterministic_invariance_check: needs sigma = 0");
  require_dim(domain.dim, config.dim(), "invariance domain");
  Rng r = init_rng(settings.seed, 0, 0);
  const auto n = static_cast<Eigen::Index>(settings.particles);
  ParticleSystem sys(config, settings, config.init.sample(n, r));
  InvarianceReport rep;
  rep.max_signed_distance = -1e300;
  auto scan = [&] {
    for (Eigen::Index i = 0; i < n; ++i) {
      double sd = domain.signed_distance(sys.positions().row(i).data());
      rep.max_signed_distance = std::max(rep.max_signed_distance, sd);
      if (sd >= 0) ++rep.violations;
    }
  };
  scan();
  rep.start_inside = rep.violations == 0;
  Cloud zero = Cloud::Zero(n, config.dim());
  const auto steps = static_cast<std::size_t>(std::llround(T / settings.dt));
  for (std::size_t k = 0; k < steps; ++k) {
    sys.step(zero);
    scan();
  }
  rep.ok = rep.violations == 0;
  return rep;
}

}  // namespace sidlab
