#pragma once

#include "sidlab/kernel.hpp"

#include <cstddef>
#include <functional>
#include <vector>

namespace sidlab {

struct Series {
  std::vector<double> times;
  std::vector<double> values;
};

// f' = -alpha f + beta int f dR(t) + gamma, Crank-Nicolson with trapezoidal memory;
// memory integrals use O(1) running recurrences
Series integrate_extremal(double alpha, double beta, double gamma, const MemoryKernel& kernel,
                          double f0, double T, double dt);
// same with a nonnegative forcing deficit: f' = ... + gamma - h(t)
Series integrate_extremal(double alpha, double beta, double gamma, const MemoryKernel& kernel,
                          double f0, double T, double dt, const std::function<double(double)>& h);

// running int_0^t x(s) R(t, ds) on the grid of x
std::vector<double> memory_average(const std::vector<double>& x, const MemoryKernel& kernel, double dt);

struct Envelope {
  std::vector<double> times;
  std::vector<double> x;      // staircase c^n on [t_n, t_{n+1})
  std::vector<double> steps;  // t_0 = 0, t_1, ...
  double c = 0;               // sqrt(beta / alpha)
  std::size_t depth = 0;      // number of constructed steps after t_0
  bool truncated = false;     // the next step time did not fit in [0, T]
  bool nonincreasing = false;

  std::size_t max_depth = 0;  // requested depth cap, 0 = until T
};

Envelope build_envelope(double alpha, double beta, const MemoryKernel& kernel, double T, double dt,
                        std::size_t max_depth = 0);

struct DominationReport {
  bool ok = false;
  double worst_margin = 0;  // min over the grid of bound - f
  double tolerance = 0;
  std::size_t violations = 0;
};

// f <= gamma/(alpha-beta) + x (f(0) - gamma/(alpha-beta))_+ pointwise, with tolerance
// 1e-8 + 5 dt (alpha + beta) max|f|
DominationReport verify_domination(const Series& f, double alpha, double beta, double gamma,
                                   const Envelope& envelope);

}  // namespace sidlab
