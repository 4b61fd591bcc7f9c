#pragma once

#include "sidlab/model.hpp"

#include <optional>
#include <vector>

namespace sidlab {

struct PiResult {
  Vector z;
  double residual = 0;
  std::size_t iterations = 0;
  bool converged = false;
  bool used_flow = false;
};

// rest point of z' = a(z) + b(z, delta_v): damped Newton, flow fallback on stalls
PiResult pi_map(const ModelConfig& config, const Vector& v, double tol = 1e-12,
                const std::optional<Vector>& start = std::nullopt);

// rest point of a alone, Newton from the origin
Vector drift_rest_point(const ModelConfig& config, double tol = 1e-12);

struct FixedPointOptions {
  double tol = 1e-12;
  std::size_t max_iter = 200;
  double radius = 1e6;  // iterates leaving ball(0, radius) count as divergence
  std::optional<Vector> start;
};

struct FixedPointResult {
  Vector lambda;
  double residual = 0;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> gaps;  // |v_{k+1} - v_k|
  // max over k of gaps[k+1] / gaps[k] while gaps stay above roundoff
  double contraction_ratio() const;
};

FixedPointResult find_lambda(const ModelConfig& config, const FixedPointOptions& opts = {});

double lambda_residual(const ModelConfig& config, const Vector& lambda);

}  // namespace sidlab
