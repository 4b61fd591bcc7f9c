#include "sidlab/fixedpoint.hpp"

#include "sidlab/engine.hpp"

#include <cmath>

namespace sidlab {

namespace {

Matrix fd_jacobian(const ModelConfig& c, const Vector& z, const Vector& v) {
  const int d = c.dim();
  Matrix J(d, d);
  Vector zp = z, zm = z, fp(d), fm(d);
  for (int j = 0; j < d; ++j) {
    const double h = 1e-6 * (1 + std::abs(z[j]));
    zp[j] = z[j] + h;
    zm[j] = z[j] - h;
    frozen_drift(c, zp.data(), v.data(), fp.data());
    frozen_drift(c, zm.data(), v.data(), fm.data());
    J.col(j) = (fp - fm) / (2 * h);
    zp[j] = zm[j] = z[j];
  }
  return J;
}

}  // namespace

PiResult pi_map(const ModelConfig& config, const Vector& v, double tol,
                const std::optional<Vector>& start) {
  require_dim(v.size(), config.dim(), "pi_map anchor");
  const int d = config.dim();
  PiResult out;
  Vector z = start ? *start : v;
  require_dim(z.size(), d, "pi_map start");
  Vector r = frozen_drift(config, z, v);
  double nr = r.norm();
  double best = nr;
  Vector best_z = z;
  int flows = 0;
  for (std::size_t it = 0; it < 200; ++it) {
    out.iterations = it;
    if (nr <= tol) break;
    Matrix J = fd_jacobian(config, z, v);
    Eigen::FullPivLU<Matrix> lu(J);
    bool accepted = false;
    if (lu.isInvertible()) {
      Vector dz = lu.solve(-r);
      if (dz.allFinite()) {
        double step = 1.0;
        for (int h = 0; h < 40; ++h, step *= 0.5) {
          Vector zn = z + step * dz;
          Vector rn = frozen_drift(config, zn, v);
          if (rn.norm() < (1 - 1e-4 * step) * nr) {
            z = zn;
            r = rn;
            nr = rn.norm();
            accepted = true;
            break;
          }
        }
      }
    }
    if (!accepted) {
      // stalled: follow the flow, which contracts towards the rest point
      if (++flows > 5) break;
      out.used_flow = true;
      FlowPath p = deterministic_flow(config, v, z, 20.0, 0.01);
      Vector zn = p.end();
      Vector rn = frozen_drift(config, zn, v);
      if (!(rn.norm() < nr)) break;
      z = zn;
      r = rn;
      nr = rn.norm();
    }
    if (nr < best) {
      best = nr;
      best_z = z;
    }
  }
  if (nr < best) {
    best = nr;
    best_z = z;
  }
  out.z = best_z;
  out.residual = best;
  out.converged = best <= tol;
  return out;
}

Vector drift_rest_point(const ModelConfig& config, double tol) {
  ModelConfig bare = config;
  bare.interaction = InteractionField::zero(config.dim());
  Vector origin = Vector::Zero(config.dim());
  PiResult r = pi_map(bare, origin, tol, origin);
  if (!r.converged)
    throw Error("drift rest point: Newton failed, best residual " + std::to_string(r.residual));
  return r.z;
}

double lambda_residual(const ModelConfig& config, const Vector& lambda) {
  return frozen_drift(config, lambda, lambda).norm();
}

double FixedPointResult::contraction_ratio() const {
  double worst = 0;
  for (std::size_t k = 0; k + 1 < gaps.size(); ++k) {
    if (gaps[k] < 1e-8 || gaps[k + 1] < 1e-9) break;
    worst = std::max(worst, gaps[k + 1] / gaps[k]);
  }
  return worst;
}

FixedPointResult find_lambda(const ModelConfig& config, const FixedPointOptions& opts) {
  config.validate();
  FixedPointResult out;
  Vector v = opts.start ? *opts.start : drift_rest_point(config, opts.tol);
  require_dim(v.size(), config.dim(), "find_lambda start");
  for (std::size_t k = 0; k < opts.max_iter; ++k) {
    PiResult p = pi_map(config, v, opts.tol);
    if (!p.converged && p.residual > 10 * opts.tol)
      throw Error("find_lambda: pi_map did not converge, residual " + std::to_string(p.residual));
    const double gap = (p.z - v).norm();
    out.gaps.push_back(gap);
    v = p.z;
    out.iterations = k + 1;
    if (!(v.norm() <= opts.radius))
      throw Error("find_lambda: iterates left the ball of radius " + std::to_string(opts.radius) +
                  "; A2 is likely violated");
    if (gap <= opts.tol) {
      out.converged = true;
      break;
    }
  }
  out.lambda = v;
  out.residual = lambda_residual(config, v);
  if (out.residual > 10 * opts.tol) out.converged = false;
  return out;
}

}  // namespace sidlab
