#pragma once

#include "sidlab/engine.hpp"
#include "sidlab/model.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace sidlab {

enum class DomainKind { ball, product, halfspaces };
std::string to_string(DomainKind k);

struct Domain {
  DomainKind kind = DomainKind::ball;
  int dim = 0;
  Vector center;  // ball center, position-ball center, or interior reference point
  double radius = 1;
  Matrix normals;  // halfspaces: unit rows
  Vector offsets;  // halfspaces: n_k . z < b_k
  double inflation = 0;

  static Domain ball(const Vector& c, double r);
  // ball on the first c.size() coordinates, free remaining block
  static Domain product(const Vector& position_center, double r, int total_dim);
  static Domain halfspaces(const Matrix& N, const Vector& b, const Vector& reference);

  int position_dim() const { return static_cast<int>(center.size()); }
  double signed_distance(const double* z) const;
  double signed_distance(const Vector& z) const;
  bool contains(const Vector& z) const { return signed_distance(z) < 0; }
  // xi > 0 exterior, xi < 0 interior
  Domain inflated(double xi) const;
  double inradius() const;
};

// (D_{i,xi}, D_{e,xi})
std::pair<Domain, Domain> nested_domains(const Domain& domain, double xi);

struct ExitResult {
  double time = 0;
  bool censored = false;
};

// streaming first exit with linear interpolation of the signed distance
class ExitDetector {
 public:
  ExitDetector(const Domain& domain, double t0, const double* z0);
  // true once the state has left; later calls are ignored
  bool observe(double t, const double* z);
  bool exited() const { return exited_; }
  double exit_time() const { return time_; }

 private:
  const Domain* domain_;
  double prev_t_, prev_sd_;
  bool exited_ = false;
  double time_ = 0;
};

ExitResult first_exit(const std::vector<double>& times, const Cloud& path, const Domain& domain);

enum class CampaignMode { tagged, frozen, all_particles };
std::string to_string(CampaignMode m);
CampaignMode campaign_mode_from_string(const std::string& s);

struct CampaignOptions {
  std::vector<double> sigma;  // noise levels
  std::size_t replicas = 300;
  CampaignMode mode = CampaignMode::tagged;
  IntegratorSettings settings;
  std::optional<double> predicted_H;  // energy units
  double horizon_multiplier = 200;
  double fallback_horizon = 1e4;  // used without a prediction
  std::optional<Vector> lambda;   // frozen mode; computed when absent
  std::size_t workers = 0;
  bool allow_coarse_dt = false;   // skip the dt <= sigma^2/10 rule
  std::size_t min_uncensored = 30;
};

struct SigmaSamples {
  double sigma = 0;
  double horizon = 0;
  std::vector<double> tau;
  std::vector<char> censored;
  std::size_t censored_count() const;
  double censored_fraction() const;
};

struct SigmaFitPoint {
  double sigma = 0;
  double x = 0;  // 1/sigma^2
  double mean_log = 0;
  double se = 0;
  std::size_t used = 0;
  std::size_t censored = 0;
  bool usable = false;
};

struct KramersFit {
  double slope = 0;
  double intercept = 0;
  double slope_se = 0;
  double slope_lo = 0, slope_hi = 0;  // 95%
  double theta = 0.5;
  double barrier = 0;  // theta * slope
  double barrier_lo = 0, barrier_hi = 0;
  std::vector<SigmaFitPoint> points;
  double barrier_half_width() const { return 0.5 * (barrier_hi - barrier_lo); }
};

// OLS of mean log tau against 1/sigma^2; slope CI from per-sigma standard errors
KramersFit kramers_fit(const std::vector<SigmaSamples>& samples, double theta = 0.5,
                       std::size_t min_uncensored = 30);

struct ExitCampaignResult {
  std::string model;
  std::uint64_t model_hash = 0;
  std::uint64_t seed = 0;
  CampaignMode mode = CampaignMode::tagged;
  Vector lambda;
  IntegratorSettings settings;
  double theta = 0.5;
  std::optional<double> predicted_H;
  std::vector<SigmaSamples> samples;
  std::optional<KramersFit> fit;
  std::string fit_error;
};

ExitCampaignResult run_campaign(const ModelConfig& config, const Domain& domain,
                                const CampaignOptions& opts);

// default grid: k points equally spaced in 1/sigma^2 over sigma^2 in [H/4, H/1.2]
std::vector<double> default_sigma_grid(double predicted_H, std::size_t points = 4, double theta = 0.5);

// one-sided Mann-Whitney p-value for "a is stochastically smaller than b"
double mann_whitney_less(const std::vector<double>& a, const std::vector<double>& b);

struct InvarianceReport {
  bool ok = false;
  bool start_inside = false;
  double max_signed_distance = 0;
  std::size_t violations = 0;  // (step, particle) states outside
};

InvarianceReport deterministic_invariance_check(const ModelConfig& config, const Domain& domain,
                                                double T, const IntegratorSettings& settings);

}  // namespace sidlab
