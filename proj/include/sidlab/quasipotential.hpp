#pragma once

#include "sidlab/exits.hpp"
#include "sidlab/model.hpp"

#include <functional>
#include <iosfwd>
#include <limits>
#include <vector>

namespace sidlab {

struct ScalarField {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
};

struct BoundaryMinimum {
  double value = 0;  // inf over the boundary of U - U(lambda)
  Vector argmin;
  std::size_t samples = 0;
};

// inf over the boundary of the domain's position block; ball and product domains
BoundaryMinimum boundary_infimum(const ScalarField& U, const Vector& lambda, const Domain& domain);

double elliptic_H(const ScalarField& U, const Vector& lambda, const Domain& domain);
// U recovered from the frozen drift a + b(., delta_lambda) = -grad U; throws when the frozen
// drift is not a gradient or the control matrix is not the identity
double elliptic_H(const ModelConfig& config, const Vector& lambda, const Domain& domain);

// kinetic frozen drift; the position force must point into the domain on its boundary
double kinetic_H(const ModelConfig& config, const Vector& lambda, const Domain& domain);

struct DiscretePath {
  std::vector<double> times;
  Cloud states;               // rows = nodes
  bool second_order = false;  // kinetic form: positions only, velocities from differences
};

DiscretePath straight_path(const Vector& from, const Vector& to, double T, std::size_t nodes,
                           bool second_order = false);

// 1/4 int |u|^2 with phi' = f(phi) + Sigma u, Sigma = M / sqrt(2 theta), f = a + b(., delta_lambda).
// Returns +inf when the path needs control outside the range of Sigma.
double action_of_path(const DiscretePath& path, const ModelConfig& config, const Vector& lambda);

struct ActionOptions {
  std::size_t nodes = 200;
  std::size_t T_points = 8;
  double rho = 0;  // T grid scale; 0 = declared rho, else 1
  int max_iterations = 3000;
  std::size_t workers = 1;
};

struct ActionResult {
  double value = std::numeric_limits<double>::infinity();
  double T = 0;
  DiscretePath path;
  bool converged = false;
  std::vector<std::pair<double, double>> per_T;  // (T, action)
};

// fixed-endpoint L-BFGS over discrete paths from lambda to the target, best over the T grid.
// Kinetic models take a position target and start at rest.
ActionResult minimize_action(const ModelConfig& config, const Vector& lambda, const Vector& target,
                             const ActionOptions& opts = {});

struct ReductionReport {
  std::size_t points = 0;
  std::size_t violations = 0;      // inner product > 0
  std::size_t boundary_cases = 0;  // inner product = 0 within round-off
  double worst = -std::numeric_limits<double>::infinity();
  std::vector<Vector> violating;
  bool certified() const { return points > 0 && violations == 0 && boundary_cases == 0; }
};

// <b, b - 4 grad U> < 0 on a grid over the closure of the domain minus lambda
ReductionReport reduction_probe(const ModelConfig& config, const Vector& lambda, const Domain& domain,
                                std::size_t per_axis = 21);

void write_path(std::ostream& os, const DiscretePath& path, const std::string& label);

}  // namespace sidlab
