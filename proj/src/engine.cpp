#include "sidlab/engine.hpp"

#include "sidlab/parallel.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace sidlab {

void IntegratorSettings::validate() const {
  if (!(dt > 0)) throw ConfigError("integrator.dt", "dt must be positive");
  if (particles < 1) throw ConfigError("integrator.particles", "need at least one particle");
  if (snapshot_stride < 1) throw ConfigError("integrator.snapshot_stride", "stride must be >= 1");
  if (!(horizon >= 0)) throw ConfigError("integrator.horizon", "horizon must be >= 0");
}

std::size_t IntegratorSettings::steps() const {
  return static_cast<std::size_t>(std::llround(horizon / dt));
}

Cloud TrajectoryBatch::particle_path(std::size_t i) const {
  Cloud out(static_cast<Eigen::Index>(states.size()), dim());
  for (std::size_t k = 0; k < states.size(); ++k) out.row(k) = states[k].row(i);
  return out;
}

void write_trajectory(std::ostream& os, const TrajectoryBatch& batch) {
  os << "# sidlab-trajectory v1\n";
  os << "# model " << (batch.model.empty() ? "-" : batch.model) << " stream " << batch.stream
     << "\n";
  os << "# columns time particle";
  for (int i = 0; i < batch.dim(); ++i) os << " x" << i + 1;
  os << "\n";
  char buf[64];
  for (std::size_t k = 0; k < batch.times.size(); ++k) {
    const Cloud& s = batch.states[k];
    for (Eigen::Index p = 0; p < s.rows(); ++p) {
      std::snprintf(buf, sizeof buf, "%.17g %ld", batch.times[k], static_cast<long>(p));
      os << buf;
      for (Eigen::Index i = 0; i < s.cols(); ++i) {
        std::snprintf(buf, sizeof buf, " %.17g", s(p, i));
        os << buf;
      }
      os << "\n";
    }
  }
}

NoiseSource::NoiseSource(std::uint64_t seed, std::uint64_t sigma_index, std::uint64_t replica,
                         std::size_t particles, Purpose purpose) {
  rngs_.reserve(particles);
  for (std::size_t i = 0; i < particles; ++i)
    rngs_.emplace_back(derive_stream(
        seed, {static_cast<std::uint64_t>(purpose), sigma_index, replica, static_cast<std::uint64_t>(i)}));
}

void NoiseSource::fill(Cloud& xi) {
  for (Eigen::Index i = 0; i < xi.rows(); ++i) {
    Rng& r = rngs_[i];
    double* row = xi.row(i).data();
    for (Eigen::Index j = 0; j < xi.cols(); ++j) row[j] = r.normal();
  }
}

Rng init_rng(std::uint64_t seed, std::uint64_t sigma_index, std::uint64_t replica) {
  return Rng(derive_stream(seed, {static_cast<std::uint64_t>(Purpose::init), sigma_index, replica}));
}

// ---- particle system ----

ParticleSystem::ParticleSystem(const ModelConfig& config, const IntegratorSettings& settings,
                               Cloud initial)
    : config_(config),
      dt_(settings.dt),
      stride_(settings.snapshot_stride),
      summary_(settings.summary_snapshots && config.interaction.mean_only()),
      x_(std::move(initial)),
      store_(settings.snapshot_capacity) {
  config_.validate();
  settings.validate();
  const int d = config_.dim();
  require_dim(x_.cols(), d, "initial cloud");
  if (x_.rows() < 1) throw Error("initial cloud is empty");
  if (!x_.allFinite()) throw Error("initial cloud is not finite");
  drift_ = Cloud::Zero(x_.rows(), d);
  noise_buf_.resize(x_.rows(), d);
  mean_buf_ = Vector::Zero(d);
  b_buf_ = Vector::Zero(d);
  const double s = config_.sigma * std::sqrt(dt_);
  if (config_.diffusion.diagonal) scaled_diag_ = s * config_.diffusion.M.diagonal();
  else scaled_M_ = s * config_.diffusion.M;
  take_snapshot();
  prepare_interaction();
}

void ParticleSystem::freeze_at(const Vector& v) {
  require_dim(v.size(), config_.dim(), "frozen point");
  frozen_ = true;
  frozen_measure_ = EmpiricalMeasure::point(v);
  mean_buf_ = v;
}

void ParticleSystem::take_snapshot() {
  // dirac summaries are never read back
  if (summary_ && config_.kernel.kind == KernelKind::dirac) return;
  if (summary_) {
    store_.push(time(), EmpiricalMeasure::point(x_.colwise().mean().transpose()));
  } else {
    store_.push(time(), EmpiricalMeasure(x_));
  }
}

void ParticleSystem::prepare_interaction() {
  if (frozen_ || config_.kernel.kind == KernelKind::dirac) return;
  if (config_.interaction.mean_only()) cached_mean_ = mixture_mean(store_, config_.kernel, time());
  else cached_mixture_ = mixture(store_, config_.kernel, time());
}

EmpiricalMeasure ParticleSystem::interaction_measure() const {
  if (frozen_) return frozen_measure_;
  if (config_.kernel.kind == KernelKind::dirac) return cloud();
  return mixture(store_, config_.kernel, store_.times().back());
}

double ParticleSystem::matched_interaction_w2sq(const ParticleSystem& a, const ParticleSystem& b) {
  const bool live_a = !a.frozen_ && a.config_.kernel.kind == KernelKind::dirac;
  const bool live_b = !b.frozen_ && b.config_.kernel.kind == KernelKind::dirac;
  if (live_a && live_b && a.x_.rows() == b.x_.rows())
    return (a.x_ - b.x_).rowwise().squaredNorm().mean();
  if (b.frozen_) return second_moment_about(a.interaction_measure(), b.mean_buf_);
  if (a.frozen_) return second_moment_about(b.interaction_measure(), a.mean_buf_);
  double w = w2_matched(a.interaction_measure(), b.interaction_measure());
  return w * w;
}

void ParticleSystem::step(NoiseSource& noise) {
  noise.fill(noise_buf_);
  step(noise_buf_);
}

void ParticleSystem::step(const Cloud& xi) {
  const Eigen::Index n = x_.rows();
  const int d = config_.dim();
  const auto& drift = config_.drift;
  const auto& inter = config_.interaction;
  const bool mean_only = inter.mean_only();
  const bool dirac = config_.kernel.kind == KernelKind::dirac;
  double* b = b_buf_.data();

  const double* mean = nullptr;
  EmpiricalMeasure live;
  const EmpiricalMeasure* measure = nullptr;
  if (frozen_) {
    mean = mean_buf_.data();
    measure = &frozen_measure_;
  } else if (dirac) {
    if (mean_only) {
      mean_buf_ = x_.colwise().mean().transpose();
      mean = mean_buf_.data();
    } else {
      live = EmpiricalMeasure(x_);
      measure = &live;
    }
  } else if (mean_only) {
    mean = cached_mean_.data();
  } else {
    measure = &cached_mixture_;
  }

  for (Eigen::Index i = 0; i < n; ++i) {
    const double* z = x_.row(i).data();
    double* f = drift_.row(i).data();
    drift.evaluate(z, f);
    if (mean_only) inter.evaluate_mean(z, mean, b);
    else inter.evaluate(z, *measure, b);
    for (int j = 0; j < d; ++j) f[j] += b[j];
  }

  const bool diag = config_.diffusion.diagonal;
  for (Eigen::Index i = 0; i < n; ++i) {
    double* z = x_.row(i).data();
    const double* f = drift_.row(i).data();
    const double* e = xi.row(i).data();
    bool bad = false;
    for (int j = 0; j < d; ++j) {
      double noise;
      if (diag) {
        noise = scaled_diag_[j] * e[j];
      } else {
        noise = 0;
        for (int k = 0; k < d; ++k) noise += scaled_M_(j, k) * e[k];
      }
      z[j] += f[j] * dt_ + noise;
      if (!(std::abs(z[j]) <= kExplosionGuard)) bad = true;
    }
    if (bad) throw ExplosionError(steps_ + 1, static_cast<std::size_t>(i));
  }
  ++steps_;
  if (steps_ % stride_ == 0) {
    take_snapshot();
    prepare_interaction();
  }
}

// ---- drivers ----

namespace {

void record(TrajectoryBatch& batch, const ParticleSystem& sys) {
  batch.times.push_back(sys.time());
  batch.states.push_back(sys.positions());
}

TrajectoryBatch run(ParticleSystem& sys, const IntegratorSettings& settings, NoiseSource& noise) {
  TrajectoryBatch batch;
  batch.model = sys.config().name;
  record(batch, sys);
  const std::size_t steps = settings.steps();
  for (std::size_t k = 1; k <= steps; ++k) {
    sys.step(noise);
    if (k == steps || (settings.record_stride && k % settings.record_stride == 0)) record(batch, sys);
  }
  return batch;
}

}  // namespace

SimulationResult simulate_particles(const ModelConfig& config, const IntegratorSettings& settings) {
  config.validate();
  settings.validate();
  if (config.interaction.family != InteractionFamily::zero && settings.particles < 2)
    throw ConfigError("integrator.particles", "interacting systems need at least two particles");
  Rng r = init_rng(settings.seed, 0, 0);
  const auto n = static_cast<Eigen::Index>(settings.particles);
  ParticleSystem sys(config, settings, config.init.sample(n, r));
  NoiseSource noise(settings.seed, 0, 0, settings.particles);
  SimulationResult out;
  out.batch = run(sys, settings, noise);
  out.batch.stream = derive_stream(settings.seed, {static_cast<std::uint64_t>(Purpose::noise), 0, 0});
  out.store = sys.store();
  return out;
}

TrajectoryBatch simulate_linear_frozen(const ModelConfig& config, const Vector& lambda,
                                       const IntegratorSettings& settings) {
  config.validate();
  settings.validate();
  require_dim(lambda.size(), config.dim(), "lambda");
  const auto n = static_cast<Eigen::Index>(settings.particles);
  Cloud start = lambda.transpose().replicate(n, 1);
  ParticleSystem sys(config, settings, start);
  sys.freeze_at(lambda);
  NoiseSource noise(settings.seed, 0, 0, settings.particles);
  TrajectoryBatch batch = run(sys, settings, noise);
  batch.stream = derive_stream(settings.seed, {static_cast<std::uint64_t>(Purpose::noise), 0, 0});
  return batch;
}

CouplingResult parallel_couple(const ModelConfig& a, const ModelConfig& b,
                               const IntegratorSettings& settings, const CouplingOptions& opts) {
  a.validate();
  b.validate();
  settings.validate();
  require_dim(b.dim(), a.dim(), "coupled systems");
  const int d = a.dim();
  const auto n = static_cast<Eigen::Index>(settings.particles);

  Cloud xa, xb;
  if (opts.initial_a) {
    xa = *opts.initial_a;
  } else {
    Rng r = init_rng(settings.seed, opts.sigma_index, opts.replica);
    xa = a.init.sample(n, r);
  }
  if (opts.initial_b) {
    xb = *opts.initial_b;
  } else if (opts.frozen_b) {
    xb = opts.frozen_b->transpose().replicate(n, 1);
  } else {
    Rng r = init_rng(settings.seed, opts.sigma_index, opts.replica);
    xb = b.init.sample(n, r);
  }
  require_dim(xb.rows(), xa.rows(), "coupled clouds");

  ParticleSystem sa(a, settings, xa), sb(b, settings, xb);
  if (opts.frozen_b) sb.freeze_at(*opts.frozen_b);
  NoiseSource noise(settings.seed, opts.sigma_index, opts.replica, static_cast<std::size_t>(xa.rows()));
  Cloud xi(xa.rows(), d);

  CouplingResult res;
  res.item1_applies = a.sigma == b.sigma && a.diffusion.M == b.diffusion.M;
  res.item2_applies = b.sigma == 0;
  const double dt = settings.dt;
  const double rho = opts.rho, kappa = opts.kappa;
  const double noise_rate = a.sigma * a.sigma * a.diffusion.frob2;
  const double bound_rate = d * a.sigma * a.sigma * a.diffusion.norm * a.diffusion.norm;
  res.a.model = a.name;
  res.b.model = b.name;
  record(res.a, sa);
  record(res.b, sb);

  const std::size_t steps = settings.steps();
  for (std::size_t k = 0; k < steps; ++k) {
    const Cloud za = sa.positions(), zb = sb.positions();
    const double w2 = ParticleSystem::matched_interaction_w2sq(sa, sb);
    res.times.push_back(sa.time());
    res.gap_sq.push_back((za - zb).rowwise().squaredNorm().mean());
    res.w2_sq.push_back(w2);

    noise.fill(xi);
    sa.step(xi);
    sb.step(xi);
    const Cloud df = sa.last_drift() - sb.last_drift();
    for (Eigen::Index i = 0; i < za.rows(); ++i) {
      const Eigen::RowVectorXd dz = za.row(i) - zb.row(i);
      const double g0 = dz.squaredNorm();
      const double f2 = df.row(i).squaredNorm();
      const double rhs_core = dt * (-2 * rho * g0 + 2 * kappa * w2) + dt * dt * f2;
      const double tol = 1e-12 * (1 + g0 + dt * dt * f2 + dt * 2 * kappa * w2);
      if (res.item1_applies) {
        const double lhs = (sa.positions().row(i) - sb.positions().row(i)).squaredNorm() - g0;
        const double excess = lhs - rhs_core;
        res.item1_worst = std::max(res.item1_worst, excess);
        ++res.item1_checks;
        if (excess > tol) ++res.item1_violations;
      }
      if (res.item2_applies) {
        // conditional expectation of the next squared gap given the current state
        const double lhs = (dz + dt * df.row(i)).squaredNorm() + dt * noise_rate - g0;
        const double excess = lhs - (rhs_core + dt * bound_rate);
        res.item2_worst = std::max(res.item2_worst, excess);
        ++res.item2_checks;
        if (excess > tol) ++res.item2_violations;
      }
    }
    if (settings.record_stride && (k + 1) % settings.record_stride == 0) {
      record(res.a, sa);
      record(res.b, sb);
    }
  }
  res.times.push_back(sa.time());
  res.gap_sq.push_back((sa.positions() - sb.positions()).rowwise().squaredNorm().mean());
  res.w2_sq.push_back(ParticleSystem::matched_interaction_w2sq(sa, sb));
  if (res.a.times.back() != sa.time()) {
    record(res.a, sa);
    record(res.b, sb);
  }
  return res;
}

// ---- deterministic flows ----

namespace {

template <class F>
FlowPath rk4(F&& f, const Vector& z0, double T, double dt) {
  if (!(dt > 0)) throw Error("flow: dt must be positive");
  if (!(T >= 0)) throw Error("flow: T must be >= 0");
  const auto steps = std::max<long long>(1, std::llround(std::ceil(T / dt - 1e-9)));
  const double h = T / static_cast<double>(steps);
  const int d = static_cast<int>(z0.size());
  FlowPath p;
  p.states.resize(steps + 1, d);
  p.times.resize(steps + 1);
  Vector z = z0, k1(d), k2(d), k3(d), k4(d), tmp(d);
  p.states.row(0) = z.transpose();
  p.times[0] = 0;
  for (long long s = 1; s <= steps; ++s) {
    f(z, k1);
    tmp = z + 0.5 * h * k1;
    f(tmp, k2);
    tmp = z + 0.5 * h * k2;
    f(tmp, k3);
    tmp = z + h * k3;
    f(tmp, k4);
    z += (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
    if (!(z.cwiseAbs().maxCoeff() <= kExplosionGuard))
      throw ExplosionError(static_cast<std::size_t>(s), 0);
    p.states.row(s) = z.transpose();
    p.times[s] = h * static_cast<double>(s);
  }
  return p;
}

}  // namespace

FlowPath deterministic_flow(const ModelConfig& config, const Vector& v, const Vector& z0, double T,
                            double dt) {
  require_dim(v.size(), config.dim(), "flow anchor");
  require_dim(z0.size(), config.dim(), "flow start");
  return rk4([&](const Vector& z, Vector& out) { frozen_drift(config, z.data(), v.data(), out.data()); },
             z0, T, dt);
}

FlowPath deterministic_flow_self(const ModelConfig& config, const Vector& z0, double T, double dt) {
  require_dim(z0.size(), config.dim(), "flow start");
  return rk4([&](const Vector& z, Vector& out) { frozen_drift(config, z.data(), z.data(), out.data()); },
             z0, T, dt);
}

// ---- probes ----

ShadowingTable shadowing_probe(const ModelConfig& config, const IntegratorSettings& settings,
                               const std::vector<double>& eps_grid,
                               const std::vector<double>& sigma_grid, std::size_t replicas,
                               std::size_t workers) {
  config.validate();
  settings.validate();
  if (eps_grid.empty() || sigma_grid.empty()) throw Error("shadowing_probe: empty grid");
  const std::size_t ns = sigma_grid.size(), ne = eps_grid.size();
  const auto n = static_cast<Eigen::Index>(settings.particles);
  const std::size_t steps = settings.steps();
  // exceed[r][s*ne + e]
  std::vector<std::vector<char>> exceed(replicas, std::vector<char>(ns * ne, 0));

  parallel_for(replicas, workers, [&](std::size_t r) {
    Rng ir = init_rng(settings.seed, 0, r);
    const Cloud x0 = config.init.sample(n, ir);
    ParticleSystem det(config.with_sigma(0.0), settings, x0);
    Cloud zero = Cloud::Zero(n, config.dim());
    std::vector<Eigen::RowVectorXd> ref;
    ref.reserve(steps + 1);
    ref.push_back(det.positions().row(0));
    for (std::size_t k = 0; k < steps; ++k) {
      det.step(zero);
      ref.push_back(det.positions().row(0));
    }
    for (std::size_t s = 0; s < ns; ++s) {
      if (sigma_grid[s] == 0) continue;
      ParticleSystem sys(config.with_sigma(sigma_grid[s]), settings, x0);
      NoiseSource noise(settings.seed, 0, r, settings.particles, Purpose::shadow);
      double sup = 0;
      for (std::size_t k = 0; k < steps; ++k) {
        sys.step(noise);
        sup = std::max(sup, (sys.positions().row(0) - ref[k + 1]).norm());
      }
      for (std::size_t e = 0; e < ne; ++e) exceed[r][s * ne + e] = sup > eps_grid[e];
    }
  });

  ShadowingTable t;
  t.sigma = sigma_grid;
  t.eps = eps_grid;
  t.replicas = replicas;
  t.prob = Matrix::Zero(ns, ne);
  t.std_error = Matrix::Zero(ns, ne);
  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t e = 0; e < ne; ++e) {
      double c = 0;
      for (std::size_t r = 0; r < replicas; ++r) c += exceed[r][s * ne + e];
      double p = replicas ? c / static_cast<double>(replicas) : 0;
      t.prob(s, e) = p;
      t.std_error(s, e) = replicas ? std::sqrt(p * (1 - p) / static_cast<double>(replicas)) : 0;
    }
  double s2 = 0;
  for (double s : sigma_grid) s2 += s * s;
  for (std::size_t e = 0; e < ne; ++e) {
    double sp = 0;
    for (std::size_t s = 0; s < ns; ++s) sp += sigma_grid[s] * t.prob(s, e);
    t.slope.push_back(s2 > 0 ? sp / s2 : 0);
  }
  return t;
}

StationaryEstimate stationary_second_moment(const ModelConfig& config, const Vector& point,
                                            const IntegratorSettings& settings, double burn_in,
                                            std::size_t batches) {
  if (batches < 2) throw Error("stationary_second_moment: need at least two batches");
  config.validate();
  settings.validate();
  require_dim(point.size(), config.dim(), "moment point");
  Rng r = init_rng(settings.seed, 0, 0);
  const auto n = static_cast<Eigen::Index>(settings.particles);
  ParticleSystem sys(config, settings, config.init.sample(n, r));
  NoiseSource noise(settings.seed, 0, 0, settings.particles);
  const auto burn = static_cast<std::size_t>(std::llround(burn_in / settings.dt));
  for (std::size_t k = 0; k < burn; ++k) sys.step(noise);
  const std::size_t steps = settings.steps();
  std::vector<double> series;
  for (std::size_t k = 1; k <= steps; ++k) {
    sys.step(noise);
    if (k % settings.snapshot_stride == 0)
      series.push_back((sys.positions().rowwise() - point.transpose()).rowwise().squaredNorm().mean());
  }
  if (series.size() < batches) throw Error("stationary_second_moment: horizon too short");
  const std::size_t per = series.size() / batches;
  std::vector<double> means(batches, 0);
  for (std::size_t b = 0; b < batches; ++b) {
    for (std::size_t j = 0; j < per; ++j) means[b] += series[b * per + j];
    means[b] /= static_cast<double>(per);
  }
  StationaryEstimate est;
  est.batches = batches;
  for (double m : means) est.mean += m;
  est.mean /= static_cast<double>(batches);
  double var = 0;
  for (double m : means) var += (m - est.mean) * (m - est.mean);
  var /= static_cast<double>(batches - 1);
  est.std_error = std::sqrt(var / static_cast<double>(batches));
  return est;
}

}  // namespace sidlab
