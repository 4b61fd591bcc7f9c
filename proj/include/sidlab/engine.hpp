#pragma once

#include "sidlab/measure.hpp"
#include "sidlab/model.hpp"
#include "sidlab/rng.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

namespace sidlab {

constexpr double kExplosionGuard = 1e6;

struct IntegratorSettings {
  double dt = 1e-3;
  double horizon = 1.0;
  std::size_t particles = 256;
  std::size_t snapshot_stride = 10;
  std::size_t snapshot_capacity = 256;
  std::size_t record_stride = 0;  // 0: first and last state only
  std::uint64_t seed = 0;
  // keep only snapshot means; used when the interaction sees the measure through its mean
  bool summary_snapshots = false;

  void validate() const;
  std::size_t steps() const;
};

struct TrajectoryBatch {
  std::vector<double> times;
  std::vector<Cloud> states;  // N x d per recorded time
  std::uint64_t stream = 0;
  std::string model;

  std::size_t particles() const { return states.empty() ? 0 : states.front().rows(); }
  int dim() const { return states.empty() ? 0 : static_cast<int>(states.front().cols()); }
  // path of one particle, rows = recorded times
  Cloud particle_path(std::size_t i) const;
};

// append-only columnar log: time particle x1..xd
void write_trajectory(std::ostream& os, const TrajectoryBatch& batch);

// per-particle generators keyed by (seed, sigma index, replica, particle)
class NoiseSource {
 public:
  NoiseSource(std::uint64_t seed, std::uint64_t sigma_index, std::uint64_t replica,
              std::size_t particles, Purpose purpose = Purpose::noise);
  void fill(Cloud& xi);
  Rng& particle(std::size_t i) { return rngs_[i]; }
  std::size_t size() const { return rngs_.size(); }

 private:
  std::vector<Rng> rngs_;
};

Rng init_rng(std::uint64_t seed, std::uint64_t sigma_index, std::uint64_t replica);

// Euler-Maruyama for the N-particle system; particle i interacts with the whole cloud
// including itself
class ParticleSystem {
 public:
  ParticleSystem(const ModelConfig& config, const IntegratorSettings& settings, Cloud initial);

  // replace the interaction measure by delta_v for all times
  void freeze_at(const Vector& v);
  bool frozen() const { return frozen_; }

  void step(const Cloud& xi);
  void step(NoiseSource& noise);

  double time() const { return static_cast<double>(steps_) * dt_; }
  std::size_t steps() const { return steps_; }
  const Cloud& positions() const { return x_; }
  // a + b at the positions the last step started from
  const Cloud& last_drift() const { return drift_; }
  const SnapshotStore& store() const { return store_; }
  const ModelConfig& config() const { return config_; }
  EmpiricalMeasure cloud() const { return EmpiricalMeasure(x_); }
  // the measure b is evaluated against at the current time
  EmpiricalMeasure interaction_measure() const;
  // W2^2 between the interaction measures of two systems of the same shape, index-matched
  static double matched_interaction_w2sq(const ParticleSystem& a, const ParticleSystem& b);

 private:
  void take_snapshot();
  void prepare_interaction();

  ModelConfig config_;
  double dt_;
  std::size_t stride_;
  bool summary_;
  Cloud x_, drift_, noise_buf_;
  SnapshotStore store_;
  std::size_t steps_ = 0;
  bool frozen_ = false;
  EmpiricalMeasure frozen_measure_;
  Vector mean_buf_;
  Vector b_buf_;
  EmpiricalMeasure cached_mixture_;
  Vector cached_mean_;
  Eigen::Matrix<double, Eigen::Dynamic, 1> scaled_diag_;
  Matrix scaled_M_;
};

struct SimulationResult {
  TrajectoryBatch batch;
  SnapshotStore store;
};

SimulationResult simulate_particles(const ModelConfig& config, const IntegratorSettings& settings);

// N independent copies of the frozen linear process started at lambda
TrajectoryBatch simulate_linear_frozen(const ModelConfig& config, const Vector& lambda,
                                       const IntegratorSettings& settings);

struct CouplingOptions {
  std::optional<Vector> frozen_b;  // system B uses delta at this point
  std::optional<Cloud> initial_a;
  std::optional<Cloud> initial_b;
  double rho = 0;
  double kappa = 0;
  std::uint64_t sigma_index = 0;
  std::uint64_t replica = 0;
};

struct CouplingResult {
  TrajectoryBatch a, b;
  std::vector<double> times;   // t_k
  std::vector<double> gap_sq;  // mean_i |Z_i - Z~_i|^2 at t_k
  std::vector<double> w2_sq;   // W2^2 of the interaction measures used at t_k (matched)
  bool item1_applies = false;  // sigma_a == sigma_b
  bool item2_applies = false;  // sigma_b == 0
  std::size_t item1_checks = 0, item1_violations = 0;
  std::size_t item2_checks = 0, item2_violations = 0;
  double item1_worst = -1e300, item2_worst = -1e300;  // max of lhs - rhs
};

// both systems driven by the same Gaussian increments
CouplingResult parallel_couple(const ModelConfig& a, const ModelConfig& b,
                               const IntegratorSettings& settings, const CouplingOptions& opts);

struct FlowPath {
  std::vector<double> times;
  Cloud states;
  Vector end() const { return states.row(states.rows() - 1).transpose(); }
};

// RK4 for z' = a(z) + b(z, delta_v)
FlowPath deterministic_flow(const ModelConfig& config, const Vector& v, const Vector& z0,
                            double T, double dt);
// RK4 for z' = a(z) + b(z, delta_z)
FlowPath deterministic_flow_self(const ModelConfig& config, const Vector& z0, double T, double dt);

struct ShadowingTable {
  std::vector<double> sigma;
  std::vector<double> eps;
  Matrix prob;    // sigma x eps
  Matrix std_error;
  std::vector<double> slope;  // per eps, least squares through the origin of prob vs sigma
  std::size_t replicas = 0;
};

ShadowingTable shadowing_probe(const ModelConfig& config, const IntegratorSettings& settings,
                               const std::vector<double>& eps_grid,
                               const std::vector<double>& sigma_grid, std::size_t replicas,
                               std::size_t workers = 0);

struct StationaryEstimate {
  double mean = 0;
  double std_error = 0;
  std::size_t batches = 0;
};

// time-and-particle average of |X - point|^2 after burn-in, batch-means error
StationaryEstimate stationary_second_moment(const ModelConfig& config, const Vector& point,
                                            const IntegratorSettings& settings, double burn_in,
                                            std::size_t batches);

}  // namespace sidlab
