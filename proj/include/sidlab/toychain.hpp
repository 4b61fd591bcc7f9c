#pragma once

#include "sidlab/rng.hpp"

#include <cstdint>
#include <vector>

namespace sidlab {

// two-state chain with rates exp(-b_ij(m)/sigma^2), b_ij(m) = a_ij + alpha (m(j) - m(i))
struct ChainParams {
  double a01 = 1;
  double a10 = 1;
  double alpha = 0;
  double sigma = 1;

  void validate() const;
  double rate01(double x) const;  // leaving 0 while m(0) = x
  double rate10(double x) const;
  bool symmetric() const { return a01 == a10; }
};

struct ChainPath {
  std::vector<double> times;
  std::vector<double> x;       // m_t(0)
  std::vector<double> hazard;  // cumulative exit hazard, trapezoid on the ODE grid
};

// RK4 from x_0 = 1 on a uniform grid
ChainPath occupancy_ode(const ChainParams& p, double T, double dt);

// grid sized to the fastest rate, run until x settles; used by the sampler
ChainPath occupancy_until_settled(const ChainParams& p);

// P(tau > t); throws when t lies past the end of the path
double exit_survival(const ChainParams& p, double t, const ChainPath& path);

// inverse cumulative hazard at Exp(1) draws; past the settled end the hazard is linear
std::vector<double> sample_exit_times(const ChainParams& p, std::size_t n, Rng& rng);
std::vector<double> sample_exit_times(const ChainParams& p, const ChainPath& settled, std::size_t n,
                                      Rng& rng);

struct SpreadTable {
  std::vector<double> sigma;
  std::vector<double> centers;
  double delta = 0.1;
  std::vector<std::vector<double>> mass;  // [sigma][center], empirical mass of |s^2 log tau - H| < delta
  std::vector<double> outside;            // mass outside [a - alpha - delta, a + delta]
  std::vector<std::vector<double>> exponents;  // sigma^2 log tau samples per sigma
};

SpreadTable exponent_spread(const ChainParams& p, const std::vector<double>& sigma_grid,
                            std::size_t n_per_sigma, const std::vector<double>& centers, double delta,
                            std::uint64_t seed);

}  // namespace sidlab
