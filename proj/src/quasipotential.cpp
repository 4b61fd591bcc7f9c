#include "sidlab/quasipotential.hpp"

#include "sidlab/engine.hpp"
#include "sidlab/parallel.hpp"

#include <boost/math/distributions/normal.hpp>
#include <ceres/ceres.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

namespace sidlab {

namespace {

constexpr double kPi = 3.14159265358979323846;

// 16-point Gauss-Legendre on [0, 1]
constexpr std::array<double, 8> kGlX{0.0950125098376374, 0.2816035507792589, 0.4580167776572274,
                                     0.6178762444026438, 0.7554044083550030, 0.8656312023878318,
                                     0.9445750230732326, 0.9894009349916499};
constexpr std::array<double, 8> kGlW{0.1894506104550685, 0.1826034150449236, 0.1691565193950025,
                                     0.1495959888165767, 0.1246289712555339, 0.0951585116824928,
                                     0.0622535239386479, 0.0271524594117541};

// potential of a gradient field g = -grad U, relative to the base point
ScalarField potential_of(std::function<Vector(const Vector&)> g, const Vector& base) {
  ScalarField U;
  U.value = [g, base](const Vector& z) {
    const Vector dz = z - base;
    double s = 0;
    for (int q = 0; q < 8; ++q)
      for (int sign : {-1, 1}) {
        const double t = 0.5 + sign * 0.5 * kGlX[q];
        s += 0.5 * kGlW[q] * g(base + t * dz).dot(dz);
      }
    return -s;
  };
  U.gradient = [g](const Vector& z) { return Vector(-g(z)); };
  return U;
}

Matrix jacobian_fd(const std::function<Vector(const Vector&)>& g, const Vector& z) {
  const Eigen::Index d = z.size();
  Matrix J(d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double h = 1e-5 * (1 + std::abs(z[j]));
    Vector zp = z, zm = z;
    zp[j] += h;
    zm[j] -= h;
    J.col(j) = (g(zp) - g(zm)) / (2 * h);
  }
  return J;
}

void require_gradient(const std::function<Vector(const Vector&)>& g, const Vector& center, double r) {
  const Eigen::Index d = center.size();
  for (int k = 0; k < 24; ++k) {
    Vector z = center;
    for (Eigen::Index i = 0; i < d; ++i) z[i] += r * std::sin(1.7 * (k + 1) * (i + 1) + 0.3 * k);
    const Matrix J = jacobian_fd(g, z);
    if ((J - J.transpose()).norm() > 1e-5 * (1 + J.norm())) {
      std::ostringstream os;
      os << "frozen drift is not a gradient field (asymmetric Jacobian at " << z.transpose() << ")";
      throw Error(os.str());
    }
  }
}

// Sigma = s I; returns s
double scalar_control(const Matrix& Sigma, const char* what) {
  const double s = Sigma(0, 0);
  const Matrix diff = Sigma - s * Matrix::Identity(Sigma.rows(), Sigma.cols());
  if (!(s > 0) || diff.norm() > 1e-12 * s)
    throw Error(std::string(what) + ": control matrix M/sqrt(2 theta) must be a positive multiple of the identity");
  return s;
}

double halton(std::size_t i, unsigned base) {
  double f = 1, r = 0;
  while (i > 0) {
    f /= base;
    r += f * static_cast<double>(i % base);
    i /= base;
  }
  return r;
}

std::vector<Vector> sphere_directions(int p) {
  std::vector<Vector> out;
  if (p == 1) {
    out.push_back(Vector::Constant(1, 1.0));
    out.push_back(Vector::Constant(1, -1.0));
    return out;
  }
  const int k = std::min(16, 6 + 2 * p);
  const std::size_t n = std::size_t{1} << k;
  out.reserve(n);
  if (p == 2) {
    for (std::size_t i = 0; i < n; ++i) {
      const double a = 2 * kPi * static_cast<double>(i) / static_cast<double>(n);
      Vector v(2);
      v << std::cos(a), std::sin(a);
      out.push_back(v);
    }
    return out;
  }
  static const unsigned primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};
  if (p > 16) throw DimensionError("boundary sampling supports at most 16 position dimensions");
  boost::math::normal_distribution<double> N01;
  for (std::size_t i = 1; i <= n; ++i) {
    Vector v(p);
    for (int q = 0; q < p; ++q) v[q] = boost::math::quantile(N01, halton(i, primes[q]));
    const double nv = v.norm();
    if (nv > 0) out.push_back(v / nv);
  }
  return out;
}

Vector embed(const Vector& lambda, const Vector& pos) {
  Vector z = lambda;
  z.head(pos.size()) = pos;
  return z;
}

void check_smooth_domain(const Domain& domain) {
  if (domain.kind == DomainKind::halfspaces)
    throw Error("boundary infimum needs a ball or product domain");
}

}  // namespace

BoundaryMinimum boundary_infimum(const ScalarField& U, const Vector& lambda, const Domain& domain) {
  check_smooth_domain(domain);
  const int p = domain.position_dim();
  const Vector c = domain.center;
  const double r = domain.radius;
  const double u0 = U.value(lambda);
  auto value_at = [&](const Vector& dir) { return U.value(embed(lambda, c + r * dir)) - u0; };

  const auto dirs = sphere_directions(p);
  std::vector<std::pair<double, std::size_t>> vals(dirs.size());
  for (std::size_t i = 0; i < dirs.size(); ++i) vals[i] = {value_at(dirs[i]), i};
  std::sort(vals.begin(), vals.end());

  BoundaryMinimum best;
  best.samples = dirs.size();
  best.value = vals.front().first;
  best.argmin = embed(lambda, c + r * dirs[vals.front().second]);
  if (p == 1) return best;

  // projected descent from the best few samples
  for (std::size_t s = 0; s < std::min<std::size_t>(4, vals.size()); ++s) {
    Vector dir = dirs[vals[s].second];
    double v = vals[s].first;
    double step = 0.1;
    while (step > 1e-13) {
      const Vector g = U.gradient(embed(lambda, c + r * dir)).head(p);
      Vector gt = g - g.dot(dir) * dir;
      const double ng = gt.norm();
      if (ng < 1e-15) break;
      Vector cand = dir - step * gt / ng;
      cand.normalize();
      const double vc = value_at(cand);
      if (vc < v) {
        dir = cand;
        v = vc;
        step *= 1.5;
      } else {
        step *= 0.5;
      }
    }
    if (v < best.value) {
      best.value = v;
      best.argmin = embed(lambda, c + r * dir);
    }
  }
  return best;
}

double elliptic_H(const ScalarField& U, const Vector& lambda, const Domain& domain) {
  return boundary_infimum(U, lambda, domain).value;
}

double elliptic_H(const ModelConfig& config, const Vector& lambda, const Domain& domain) {
  require_dim(lambda.size(), config.dim(), "lambda");
  if (domain.position_dim() != config.dim())
    throw DimensionError("elliptic_H needs a domain over the full state");
  const Matrix Sigma = config.diffusion.M / std::sqrt(2 * config.theta());
  const double s = scalar_control(Sigma, "elliptic_H");
  std::function<Vector(const Vector&)> g = [&config, lambda](const Vector& z) {
    return frozen_drift(config, z, lambda);
  };
  require_gradient(g, lambda, domain.radius);
  return elliptic_H(potential_of(g, lambda), lambda, domain) / (s * s);
}

double kinetic_H(const ModelConfig& config, const Vector& lambda, const Domain& domain) {
  if (config.drift.family != DriftFamily::kinetic) throw Error("kinetic_H needs a kinetic drift");
  check_smooth_domain(domain);
  const int n = config.dim() / 2;
  require_dim(lambda.size(), config.dim(), "lambda");
  if (domain.position_dim() != n) throw DimensionError("kinetic_H needs a ball over the positions");

  const Matrix Sv =
      config.diffusion.M.bottomRightCorner(n, n) / std::sqrt(2 * config.theta());
  if (config.diffusion.M.topRows(n).norm() != 0 || config.diffusion.M.bottomLeftCorner(n, n).norm() != 0)
    throw Error("kinetic_H: noise must act on the velocities only");
  const double s = scalar_control(Sv / std::sqrt(config.drift.friction), "kinetic_H");

  // position force at rest: velocity block of the frozen drift at (x, 0)
  std::function<Vector(const Vector&)> g = [&config, lambda, n](const Vector& x) {
    Vector z = Vector::Zero(2 * n);
    z.head(n) = x;
    return Vector(frozen_drift(config, z, lambda).tail(n));
  };
  const Vector lp = lambda.head(n);
  require_gradient(g, lp, domain.radius);

  const auto dirs = sphere_directions(n);
  for (const Vector& dir : dirs) {
    const Vector x = domain.center + domain.radius * dir;
    // c = -g must satisfy c . n > 0 (force pointing inward)
    if (!(-g(x).dot(dir) > 0)) {
      std::ostringstream os;
      os << "inward-flow condition fails at boundary point (" << x.transpose() << ")";
      throw Error(os.str());
    }
  }
  Domain pos = Domain::ball(domain.center, domain.radius);
  return elliptic_H(potential_of(g, lp), lp, pos) / (s * s);
}

// ---- discrete action ----

DiscretePath straight_path(const Vector& from, const Vector& to, double T, std::size_t nodes,
                           bool second_order) {
  if (nodes < 3) throw Error("a path needs at least 3 nodes");
  require_dim(to.size(), from.size(), "path endpoint");
  if (!(T > 0)) throw Error("path duration must be positive");
  DiscretePath p;
  p.second_order = second_order;
  p.times.resize(nodes);
  p.states.resize(static_cast<Eigen::Index>(nodes), from.size());
  for (std::size_t k = 0; k < nodes; ++k) {
    const double s = static_cast<double>(k) / static_cast<double>(nodes - 1);
    p.times[k] = s * T;
    p.states.row(static_cast<Eigen::Index>(k)) = ((1 - s) * from + s * to).transpose();
  }
  return p;
}

namespace {

class PathCost {
 public:
  PathCost(const ModelConfig& config, const Vector& lambda, bool second_order,
           const std::vector<double>& times)
      : config_(config), lambda_(lambda), second_(second_order), times_(times) {
    const Matrix Sigma = config.diffusion.M / std::sqrt(2 * config.theta());
    if (second_) {
      if (config.drift.family != DriftFamily::kinetic)
        throw Error("second-order paths need a kinetic drift");
      n_ = config.dim() / 2;
      control_ = Sigma.bottomRightCorner(n_, n_);
      h_ = times.back() / static_cast<double>(times.size() - 1);
      for (std::size_t k = 1; k < times.size(); ++k)
        if (std::abs(times[k] - times[k - 1] - h_) > 1e-9 * h_)
          throw Error("second-order paths need a uniform time grid");
    } else {
      n_ = config.dim();
      control_ = Sigma;
    }
    auto cod = control_.completeOrthogonalDecomposition();
    pinv_ = cod.pseudoInverse();
    null_ = Matrix::Identity(control_.rows(), control_.rows()) - control_ * pinv_;
    z_.resize(config.dim());
  }

  std::size_t terms() const { return second_ ? times_.size() : times_.size() - 1; }

  // quarter squared control of residual r, inf if r leaves the control range
  double quarter_u2(const Vector& r) const {
    if ((null_ * r).norm() > 1e-9 * (1 + r.norm())) return std::numeric_limits<double>::infinity();
    return 0.25 * (pinv_ * r).squaredNorm();
  }

  double term(const Cloud& x, std::size_t k) const {
    const auto N = static_cast<Eigen::Index>(times_.size() - 1);
    if (!second_) {
      const Eigen::Index a = static_cast<Eigen::Index>(k);
      const double h = times_[k + 1] - times_[k];
      const Vector v = (x.row(a + 1) - x.row(a)).transpose() / h;
      const Vector fl = frozen_drift(config_, Vector(x.row(a).transpose()), lambda_);
      const Vector fr = frozen_drift(config_, Vector(x.row(a + 1).transpose()), lambda_);
      return 0.5 * h * (quarter_u2(v - fl) + quarter_u2(v - fr));
    }
    const Eigen::Index i = static_cast<Eigen::Index>(k);
    const double h = h_;
    Vector pos = x.row(i).transpose(), vel, acc;
    if (i == 0) {
      // at rest at the start: ghost node mirrored
      vel = Vector::Zero(n_);
      acc = 2 * (x.row(1) - x.row(0)).transpose() / (h * h);
    } else if (i == N) {
      vel = (3 * x.row(N) - 4 * x.row(N - 1) + x.row(N - 2)).transpose() / (2 * h);
      acc = (x.row(N) - 2 * x.row(N - 1) + x.row(N - 2)).transpose() / (h * h);
    } else {
      vel = (x.row(i + 1) - x.row(i - 1)).transpose() / (2 * h);
      acc = (x.row(i + 1) - 2 * x.row(i) + x.row(i - 1)).transpose() / (h * h);
    }
    Vector& z = z_;
    z.head(n_) = pos;
    z.tail(n_) = vel;
    const Vector f = frozen_drift(config_, z, lambda_);
    const double w = (i == 0 || i == N) ? 0.5 * h : h;
    return w * quarter_u2(acc - f.tail(n_));
  }

  double total(const Cloud& x) const {
    double s = 0;
    for (std::size_t k = 0; k < terms(); ++k) s += term(x, k);
    return s;
  }

  // terms that depend on node j
  double local(const Cloud& x, std::size_t j) const {
    const std::size_t N = times_.size() - 1;
    double s = 0;
    if (!second_) {
      if (j > 0) s += term(x, j - 1);
      if (j < N) s += term(x, j);
      return s;
    }
    for (std::size_t k = (j > 0 ? j - 1 : 0); k <= std::min(N, j + 1); ++k) s += term(x, k);
    if (j + 2 >= N && j + 1 < N) s += term(x, N);
    return s;
  }

 private:
  const ModelConfig& config_;
  Vector lambda_;
  bool second_;
  std::vector<double> times_;
  int n_ = 0;
  double h_ = 0;
  Matrix control_, pinv_, null_;
  mutable Vector z_;
};

class ActionFunction final : public ceres::FirstOrderFunction {
 public:
  ActionFunction(const PathCost& cost, Cloud endpoints_template)
      : cost_(cost), x_(std::move(endpoints_template)) {}

  int NumParameters() const override { return static_cast<int>((x_.rows() - 2) * x_.cols()); }

  bool Evaluate(const double* params, double* value, double* gradient) const override {
    const Eigen::Index d = x_.cols();
    for (Eigen::Index k = 1; k + 1 < x_.rows(); ++k)
      for (Eigen::Index i = 0; i < d; ++i) x_(k, i) = params[(k - 1) * d + i];
    *value = cost_.total(x_);
    if (!std::isfinite(*value)) return false;
    if (gradient) {
      for (Eigen::Index k = 1; k + 1 < x_.rows(); ++k)
        for (Eigen::Index i = 0; i < d; ++i) {
          const double x0 = x_(k, i);
          const double h = 1e-6 * (1 + std::abs(x0));
          x_(k, i) = x0 + h;
          const double up = cost_.local(x_, static_cast<std::size_t>(k));
          x_(k, i) = x0 - h;
          const double dn = cost_.local(x_, static_cast<std::size_t>(k));
          x_(k, i) = x0;
          gradient[(k - 1) * d + i] = (up - dn) / (2 * h);
        }
    }
    return true;
  }

 private:
  const PathCost& cost_;
  mutable Cloud x_;
};

}  // namespace

double action_of_path(const DiscretePath& path, const ModelConfig& config, const Vector& lambda) {
  require_dim(lambda.size(), config.dim(), "lambda");
  if (path.times.size() < 3 || static_cast<std::size_t>(path.states.rows()) != path.times.size())
    throw Error("path needs at least 3 nodes with one state per time");
  for (std::size_t k = 1; k < path.times.size(); ++k)
    if (!(path.times[k] > path.times[k - 1])) throw Error("path times must increase strictly");
  const int want = path.second_order ? config.dim() / 2 : config.dim();
  require_dim(path.states.cols(), want, "path state");
  PathCost cost(config, lambda, path.second_order, path.times);
  return cost.total(path.states);
}

ActionResult minimize_action(const ModelConfig& config, const Vector& lambda, const Vector& target,
                             const ActionOptions& opts) {
  require_dim(lambda.size(), config.dim(), "lambda");
  const bool second = config.drift.family == DriftFamily::kinetic;
  const int n = second ? config.dim() / 2 : config.dim();
  require_dim(target.size(), n, "action target");
  if (opts.nodes < 3 || opts.T_points < 1) throw Error("action options need nodes >= 3 and a T grid");
  if (!second) {
    const Matrix Sigma = config.diffusion.M / std::sqrt(2 * config.theta());
    if (Sigma.fullPivLu().rank() < Sigma.rows())
      throw Error("first-order action minimization needs an invertible control matrix");
  }
  const Vector start = lambda.head(n);

  double rho = opts.rho;
  if (!(rho > 0)) rho = config.declared ? config.declared->rho : 1.0;
  const double Tmin = 0.5 / rho, Tmax = 20.0 / rho;
  std::vector<double> Ts(opts.T_points);
  for (std::size_t i = 0; i < Ts.size(); ++i)
    Ts[i] = Ts.size() == 1 ? Tmax
                           : Tmin * std::pow(Tmax / Tmin, static_cast<double>(i) / (Ts.size() - 1));

  std::vector<ActionResult> per(Ts.size());
  parallel_for(Ts.size(), opts.workers, [&](std::size_t i) {
    DiscretePath path = straight_path(start, target, Ts[i], opts.nodes + 2, second);
    ActionResult& out = per[i];
    out.T = Ts[i];
    PathCost cost(config, lambda, second, path.times);
    if ((target - start).norm() == 0) {
      out.value = cost.total(path.states);
      out.path = path;
      out.converged = true;
      return;
    }
    std::vector<double> params;
    for (Eigen::Index k = 1; k + 1 < path.states.rows(); ++k)
      for (Eigen::Index q = 0; q < path.states.cols(); ++q) params.push_back(path.states(k, q));
    ceres::GradientProblem problem(new ActionFunction(cost, path.states));
    ceres::GradientProblemSolver::Options so;
    so.line_search_direction_type = ceres::LBFGS;
    so.max_num_iterations = opts.max_iterations;
    so.function_tolerance = 1e-14;
    so.gradient_tolerance = 1e-11;
    so.parameter_tolerance = 1e-12;
    so.logging_type = ceres::SILENT;
    ceres::GradientProblemSolver::Summary summary;
    ceres::Solve(so, problem, params.data(), &summary);
    for (Eigen::Index k = 1; k + 1 < path.states.rows(); ++k)
      for (Eigen::Index q = 0; q < path.states.cols(); ++q)
        path.states(k, q) = params[(k - 1) * path.states.cols() + q];
    out.value = cost.total(path.states);
    out.path = std::move(path);
    out.converged = summary.termination_type == ceres::CONVERGENCE;
  });

  ActionResult best;
  for (const auto& r : per) {
    best.per_T.emplace_back(r.T, r.value);
    if (r.value < best.value) {
      const auto keep = best.per_T;
      best = r;
      best.per_T = keep;
    }
  }
  return best;
}

ReductionReport reduction_probe(const ModelConfig& config, const Vector& lambda, const Domain& domain,
                                std::size_t per_axis) {
  if (config.drift.family != DriftFamily::overdamped || config.drift.has_change())
    throw Error("reduction probe needs an overdamped drift -grad U");
  check_smooth_domain(domain);
  const int d = config.dim();
  require_dim(lambda.size(), d, "lambda");
  if (domain.position_dim() != d) throw DimensionError("reduction probe needs a full-state domain");
  if (per_axis < 2) throw Error("reduction probe needs at least 2 points per axis");
  double total = 1;
  for (int i = 0; i < d; ++i) total *= static_cast<double>(per_axis);
  if (total > 4e6) throw Error("reduction probe grid too large; lower per_axis");

  ReductionReport rep;
  std::vector<std::size_t> idx(d, 0);
  Vector z(d), b(d), gU(d);
  for (;;) {
    for (int i = 0; i < d; ++i)
      z[i] = domain.center[i] - domain.radius +
             2 * domain.radius * static_cast<double>(idx[i]) / static_cast<double>(per_axis - 1);
    if (domain.signed_distance(z) <= 1e-12 && (z - lambda).norm() > 1e-12) {
      config.interaction.evaluate_point(z.data(), lambda.data(), b.data());
      config.drift.potential.gradient(z.data(), gU.data());
      const double ip = b.dot(b - 4 * gU);
      const double tol = 1e-12 * (b.squaredNorm() + 4 * b.norm() * gU.norm()) + 1e-300;
      ++rep.points;
      rep.worst = std::max(rep.worst, ip);
      if (ip > tol) {
        ++rep.violations;
        if (rep.violating.size() < 32) rep.violating.push_back(z);
      } else if (ip >= -tol) {
        ++rep.boundary_cases;
      }
    }
    int i = 0;
    while (i < d && ++idx[i] == per_axis) idx[i++] = 0;
    if (i == d) break;
  }
  return rep;
}

void write_path(std::ostream& os, const DiscretePath& path, const std::string& label) {
  TrajectoryBatch b;
  b.model = label;
  b.times = path.times;
  for (Eigen::Index k = 0; k < path.states.rows(); ++k) b.states.push_back(path.states.row(k));
  write_trajectory(os, b);
}

}  // namespace sidlab
