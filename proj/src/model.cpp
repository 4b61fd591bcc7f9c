#include "sidlab/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace sidlab {

namespace {

// stack scratch for small dimensions
struct Scratch {
  explicit Scratch(int n) {
    if (n > static_cast<int>(local.size())) heap.resize(n);
    ptr = heap.empty() ? local.data() : heap.data();
  }
  std::array<double, 32> local{};
  std::vector<double> heap;
  double* ptr;
};

Vector random_in_ball(int d, double radius, Rng& rng) {
  Vector v(d);
  for (int i = 0; i < d; ++i) v[i] = rng.normal();
  double n = v.norm();
  if (n == 0) return Vector::Zero(d);
  double r = radius * std::pow(rng.uniform(), 1.0 / d);
  return v * (r / n);
}

}  // namespace

// ---- kernel ----

std::string to_string(KernelKind k) {
  switch (k) {
    case KernelKind::dirac: return "dirac";
    case KernelKind::uniform: return "uniform";
    case KernelKind::exponential: return "exponential";
  }
  return "?";
}

KernelKind kernel_kind_from_string(const std::string& s) {
  if (s == "dirac") return KernelKind::dirac;
  if (s == "uniform") return KernelKind::uniform;
  if (s == "exponential") return KernelKind::exponential;
  throw ConfigError("model.kernel.kind", "unknown kernel kind '" + s + "'");
}

std::vector<double> kernel_weights(const MemoryKernel& kernel, const std::vector<double>& times,
                                   double t) {
  if (times.empty()) throw Error("kernel_weights: empty snapshot list");
  const std::size_t k = times.size();
  std::vector<double> w(k, 0.0);
  if (kernel.kind == KernelKind::dirac || k == 1) {
    w[k - 1] = 1.0;
    return w;
  }
  // trapezoid cells; head [0, s0] and tail [s_k, t] go to the end nodes
  std::vector<double> cell(k);
  for (std::size_t j = 0; j < k; ++j) {
    double left = j == 0 ? times[0] : 0.5 * (times[j] - times[j - 1]);
    double right = j + 1 == k ? (t - times[k - 1]) : 0.5 * (times[j + 1] - times[j]);
    cell[j] = std::max(0.0, left) + std::max(0.0, right);
  }
  double total = 0;
  for (std::size_t j = 0; j < k; ++j) {
    double x = cell[j];
    if (kernel.kind == KernelKind::exponential) x *= std::exp(-kernel.rate * (t - times[j]));
    w[j] = x;
    total += x;
  }
  if (!(total > 0)) {
    std::fill(w.begin(), w.end(), 0.0);
    w[k - 1] = 1.0;
    return w;
  }
  for (auto& x : w) x /= total;
  return w;
}

// ---- potential ----

Potential Potential::quadratic(const Matrix& K, const Vector& c) {
  require_dim(K.rows(), c.size(), "potential hessian");
  require_dim(K.cols(), c.size(), "potential hessian");
  return Potential{c, K, 0.0};
}

Potential Potential::isotropic(int d, double rho, const Vector& c) {
  require_dim(c.size(), d, "potential center");
  return Potential{c, rho * Matrix::Identity(d, d), 0.0};
}

double Potential::value(const double* z) const {
  const int d = dim();
  double quad = 0, r2 = 0;
  for (int i = 0; i < d; ++i) {
    double di = z[i] - center[i];
    r2 += di * di;
    double row = 0;
    for (int j = 0; j < d; ++j) row += hessian(i, j) * (z[j] - center[j]);
    quad += di * row;
  }
  return 0.5 * quad + 0.25 * quartic * r2 * r2;
}

void Potential::gradient(const double* z, double* out) const {
  const int d = dim();
  double r2 = 0;
  for (int i = 0; i < d; ++i) {
    double di = z[i] - center[i];
    r2 += di * di;
  }
  for (int i = 0; i < d; ++i) {
    double row = 0;
    for (int j = 0; j < d; ++j) row += hessian(i, j) * (z[j] - center[j]);
    out[i] = row + quartic * r2 * (z[i] - center[i]);
  }
}

double Potential::value(const Vector& z) const {
  require_dim(z.size(), dim(), "potential");
  return value(z.data());
}

Vector Potential::gradient(const Vector& z) const {
  require_dim(z.size(), dim(), "potential");
  Vector g(dim());
  gradient(z.data(), g.data());
  return g;
}

// ---- drift ----

std::string to_string(DriftFamily f) {
  switch (f) {
    case DriftFamily::overdamped: return "overdamped";
    case DriftFamily::kinetic: return "kinetic";
    case DriftFamily::colored_noise: return "colored-noise";
    case DriftFamily::generalized_langevin: return "generalized-langevin";
    case DriftFamily::custom_quadratic: return "custom-quadratic";
  }
  return "?";
}

DriftFamily drift_family_from_string(const std::string& s) {
  if (s == "overdamped") return DriftFamily::overdamped;
  if (s == "kinetic") return DriftFamily::kinetic;
  if (s == "colored-noise") return DriftFamily::colored_noise;
  if (s == "generalized-langevin") return DriftFamily::generalized_langevin;
  if (s == "custom-quadratic") return DriftFamily::custom_quadratic;
  throw ConfigError("model.drift.family", "unknown drift family '" + s + "'");
}

DriftField DriftField::overdamped(Potential U) {
  DriftField f;
  f.family = DriftFamily::overdamped;
  f.dim = U.dim();
  f.potential = std::move(U);
  f.validate();
  return f;
}

DriftField DriftField::kinetic(Potential V, double gamma) {
  DriftField f;
  f.family = DriftFamily::kinetic;
  f.dim = 2 * V.dim();
  f.potential = std::move(V);
  f.friction = gamma;
  f.validate();
  return f;
}

DriftField DriftField::colored_noise(Potential V, Matrix B, Matrix F) {
  DriftField f;
  f.family = DriftFamily::colored_noise;
  f.dim = V.dim() + static_cast<int>(F.rows());
  f.potential = std::move(V);
  f.coupling = std::move(B);
  f.noise_drift = std::move(F);
  f.validate();
  return f;
}

DriftField DriftField::generalized_langevin(Potential V, double gamma, Matrix B) {
  DriftField f;
  f.family = DriftFamily::generalized_langevin;
  f.dim = V.dim() + static_cast<int>(B.rows());
  f.potential = std::move(V);
  f.friction = gamma;
  f.coupling = std::move(B);
  f.validate();
  return f;
}

DriftField DriftField::custom_quadratic(Matrix A, Vector c) {
  DriftField f;
  f.family = DriftFamily::custom_quadratic;
  f.dim = static_cast<int>(c.size());
  f.coupling = std::move(A);
  f.center = std::move(c);
  f.validate();
  return f;
}

DriftField DriftField::with_change_of_variable(const Matrix& D) const {
  require_dim(D.rows(), dim, "change of variable");
  require_dim(D.cols(), dim, "change of variable");
  Eigen::FullPivLU<Matrix> lu(D);
  if (!lu.isInvertible()) throw ConfigError("model.drift.change_of_variable", "matrix is singular");
  DriftField f = *this;
  f.change = D;
  f.change_inv = lu.inverse();
  double err = (D * f.change_inv - Matrix::Identity(dim, dim)).cwiseAbs().maxCoeff();
  if (err > 1e-12)
    throw ConfigError("model.drift.change_of_variable",
                      "D*D^-1 deviates from identity by " + std::to_string(err));
  return f;
}

int DriftField::position_dim() const {
  switch (family) {
    case DriftFamily::kinetic:
    case DriftFamily::colored_noise:
    case DriftFamily::generalized_langevin: return potential.dim();
    default: return dim;
  }
}

void DriftField::validate() const {
  if (dim <= 0) throw ConfigError("model.drift", "dimension must be positive");
  auto check_pot = [&](int n) {
    if (potential.dim() != n) throw ConfigError("model.drift.potential", "center has wrong length");
    if (potential.hessian.rows() != n || potential.hessian.cols() != n)
      throw ConfigError("model.drift.potential", "hessian has wrong shape");
  };
  switch (family) {
    case DriftFamily::overdamped: check_pot(dim); break;
    case DriftFamily::kinetic:
      if (dim % 2) throw ConfigError("model.drift", "kinetic dimension must be even");
      check_pot(dim / 2);
      break;
    case DriftFamily::colored_noise: {
      int n = potential.dim(), m = dim - n;
      check_pot(n);
      if (m <= 0) throw ConfigError("model.drift", "colored noise needs a noise block");
      if (coupling.rows() != n || coupling.cols() != m)
        throw ConfigError("model.drift.coupling", "B must be n x m");
      if (noise_drift.rows() != m || noise_drift.cols() != m)
        throw ConfigError("model.drift.noise_drift", "F must be m x m");
      break;
    }
    case DriftFamily::generalized_langevin: {
      int n = potential.dim();
      check_pot(n);
      if (dim - 2 * n < 0) throw ConfigError("model.drift", "dimension too small for GLE");
      if (coupling.rows() != dim - n || coupling.cols() != dim - n)
        throw ConfigError("model.drift.coupling", "B must act on (y, w)");
      break;
    }
    case DriftFamily::custom_quadratic:
      if (center.size() != dim || coupling.rows() != dim || coupling.cols() != dim)
        throw ConfigError("model.drift.coupling", "A must be d x d");
      break;
  }
  if (has_change() && (change.rows() != dim || change_inv.rows() != dim))
    throw ConfigError("model.drift.change_of_variable", "wrong shape");
}

void DriftField::evaluate_raw(const double* z, double* out) const {
  switch (family) {
    case DriftFamily::overdamped:
      potential.gradient(z, out);
      for (int i = 0; i < dim; ++i) out[i] = -out[i];
      return;
    case DriftFamily::kinetic: {
      const int n = dim / 2;
      potential.gradient(z, out + n);
      for (int i = 0; i < n; ++i) {
        out[i] = z[n + i];
        out[n + i] = -out[n + i] - friction * z[n + i];
      }
      return;
    }
    case DriftFamily::colored_noise: {
      const int n = potential.dim(), m = dim - n;
      potential.gradient(z, out);
      for (int i = 0; i < n; ++i) {
        double s = -out[i];
        for (int j = 0; j < m; ++j) s += coupling(i, j) * z[n + j];
        out[i] = s;
      }
      for (int i = 0; i < m; ++i) {
        double s = 0;
        for (int j = 0; j < m; ++j) s += noise_drift(i, j) * z[n + j];
        out[n + i] = s;
      }
      return;
    }
    case DriftFamily::generalized_langevin: {
      const int n = potential.dim(), q = dim - n;
      potential.gradient(z, out + n);
      for (int i = 0; i < n; ++i) {
        out[i] = z[n + i];
        out[n + i] = -out[n + i];
      }
      for (int i = 2 * n; i < dim; ++i) out[i] = 0;
      for (int r = 0; r < q; ++r) {
        double s = 0;
        for (int c = 0; c < q; ++c) s += coupling(r, c) * z[n + c];
        out[n + r] -= friction * s;
      }
      return;
    }
    case DriftFamily::custom_quadratic:
      for (int i = 0; i < dim; ++i) {
        double s = 0;
        for (int j = 0; j < dim; ++j) s += coupling(i, j) * (z[j] - center[j]);
        out[i] = -s;
      }
      return;
  }
}

void DriftField::evaluate(const double* z, double* out) const {
  if (!has_change()) {
    evaluate_raw(z, out);
    return;
  }
  Scratch w(2 * dim);
  double* dz = w.ptr;
  double* r = w.ptr + dim;
  for (int i = 0; i < dim; ++i) {
    double s = 0;
    for (int j = 0; j < dim; ++j) s += change(i, j) * z[j];
    dz[i] = s;
  }
  evaluate_raw(dz, r);
  for (int i = 0; i < dim; ++i) {
    double s = 0;
    for (int j = 0; j < dim; ++j) s += change_inv(i, j) * r[j];
    out[i] = s;
  }
}

Vector DriftField::operator()(const Vector& z) const {
  require_dim(z.size(), dim, "drift argument");
  Vector out(dim);
  evaluate(z.data(), out.data());
  return out;
}

Vector evaluate_drift(const DriftField& field, const Vector& z) { return field(z); }

// ---- interaction ----

std::string to_string(InteractionFamily f) {
  switch (f) {
    case InteractionFamily::zero: return "zero";
    case InteractionFamily::convolution: return "convolution";
    case InteractionFamily::quadratic_attractive: return "quadratic-attractive";
    case InteractionFamily::quadratic_repulsive: return "quadratic-repulsive";
    case InteractionFamily::gaussian_repulsion: return "gaussian-repulsion";
    case InteractionFamily::abp_bias: return "abp-bias";
    case InteractionFamily::two_species: return "two-species";
  }
  return "?";
}

InteractionFamily interaction_family_from_string(const std::string& s) {
  if (s == "zero") return InteractionFamily::zero;
  if (s == "convolution") return InteractionFamily::convolution;
  if (s == "quadratic-attractive") return InteractionFamily::quadratic_attractive;
  if (s == "quadratic-repulsive") return InteractionFamily::quadratic_repulsive;
  if (s == "gaussian-repulsion") return InteractionFamily::gaussian_repulsion;
  if (s == "abp-bias") return InteractionFamily::abp_bias;
  if (s == "two-species") return InteractionFamily::two_species;
  throw ConfigError("model.interaction.family", "unknown interaction family '" + s + "'");
}

InteractionField InteractionField::zero(int d) {
  InteractionField f;
  f.dim = d;
  return f;
}

InteractionField InteractionField::convolution(int d, KernelShape s, double alpha, double beta,
                                               Matrix A) {
  InteractionField f;
  f.family = InteractionFamily::convolution;
  f.dim = d;
  f.shape = s;
  f.alpha = alpha;
  f.beta = beta;
  f.output = A.size() ? std::move(A) : Matrix(-Matrix::Identity(d, d));
  f.validate();
  return f;
}

InteractionField InteractionField::quadratic_repulsive(int d, double alpha) {
  InteractionField f;
  f.family = InteractionFamily::quadratic_repulsive;
  f.dim = d;
  f.alpha = alpha;
  return f;
}

InteractionField InteractionField::quadratic_attractive(int d, double alpha) {
  InteractionField f;
  f.family = InteractionFamily::quadratic_attractive;
  f.dim = d;
  f.alpha = alpha;
  return f;
}

InteractionField InteractionField::gaussian_repulsion(int d, double alpha, double beta) {
  InteractionField f;
  f.family = InteractionFamily::gaussian_repulsion;
  f.dim = d;
  f.shape = KernelShape::gaussian;
  f.alpha = alpha;
  f.beta = beta;
  return f;
}

InteractionField InteractionField::abp_bias(int d, double omega, double eps, double eps_prime,
                                            Matrix P, Matrix A) {
  InteractionField f;
  f.family = InteractionFamily::abp_bias;
  f.dim = d;
  f.omega = omega;
  f.epsilon = eps;
  f.epsilon_prime = eps_prime;
  f.reaction = std::move(P);
  f.output = A.size() ? std::move(A) : Matrix(-Matrix::Identity(d, d));
  f.validate();
  return f;
}

InteractionField InteractionField::two_species(int n, double c11, double c12, double c21,
                                               double c22) {
  InteractionField f;
  f.family = InteractionFamily::two_species;
  f.dim = 2 * n;
  f.species = {c11, c12, c21, c22};
  return f;
}

bool InteractionField::mean_only() const {
  switch (family) {
    case InteractionFamily::zero:
    case InteractionFamily::quadratic_attractive:
    case InteractionFamily::quadratic_repulsive:
    case InteractionFamily::two_species: return true;
    case InteractionFamily::convolution: return shape == KernelShape::quadratic;
    default: return false;
  }
}

void InteractionField::validate() const {
  if (dim <= 0) throw ConfigError("model.interaction", "dimension must be positive");
  if (family == InteractionFamily::convolution || family == InteractionFamily::abp_bias) {
    if (output.rows() != dim || output.cols() != dim)
      throw ConfigError("model.interaction.output", "A must be d x d");
  }
  if (family == InteractionFamily::abp_bias) {
    if (reaction.cols() != dim || reaction.rows() < 1)
      throw ConfigError("model.interaction.reaction", "xi must be p x d");
    if (!(epsilon > 0) || !(epsilon_prime > 0))
      throw ConfigError("model.interaction", "abp needs epsilon > 0 and epsilon_prime > 0");
    if (omega < 0 || omega > 1) throw ConfigError("model.interaction.omega", "omega must be in [0,1]");
  }
  if (family == InteractionFamily::two_species && dim % 2)
    throw ConfigError("model.interaction", "two-species dimension must be even");
  if ((shape == KernelShape::gaussian || family == InteractionFamily::gaussian_repulsion) && !(beta > 0))
    throw ConfigError("model.interaction.beta", "beta must be positive");
}

void InteractionField::evaluate_mean(const double* z, const double* m, double* out) const {
  const int d = dim;
  switch (family) {
    case InteractionFamily::zero:
      for (int i = 0; i < d; ++i) out[i] = 0;
      return;
    case InteractionFamily::quadratic_repulsive:
      for (int i = 0; i < d; ++i) out[i] = 2 * alpha * (z[i] - m[i]);
      return;
    case InteractionFamily::quadratic_attractive:
      for (int i = 0; i < d; ++i) out[i] = alpha * (m[i] - z[i]);
      return;
    case InteractionFamily::convolution:
      for (int i = 0; i < d; ++i) {
        double s = 0;
        for (int j = 0; j < d; ++j) s += output(i, j) * (z[j] - m[j]);
        out[i] = 2 * alpha * s;
      }
      return;
    case InteractionFamily::two_species: {
      const int n = d / 2;
      for (int i = 0; i < n; ++i) {
        out[i] = species[0] * (z[i] - m[i]) + species[1] * (z[i] - m[n + i]);
        out[n + i] = species[2] * (z[n + i] - m[i]) + species[3] * (z[n + i] - m[n + i]);
      }
      return;
    }
    default: throw Error("interaction family is not mean-only");
  }
}

void InteractionField::evaluate_point(const double* z, const double* y, double* out) const {
  if (mean_only()) {
    evaluate_mean(z, y, out);
    return;
  }
  EmpiricalMeasure mu;
  mu.atoms = Eigen::Map<const Eigen::RowVectorXd>(y, dim);
  mu.weights = Vector::Ones(1);
  evaluate(z, mu, out);
}

void InteractionField::evaluate(const double* z, const EmpiricalMeasure& mu, double* out) const {
  const int d = dim;
  if (mean_only()) {
    if (family == InteractionFamily::zero) {
      for (int i = 0; i < d; ++i) out[i] = 0;
      return;
    }
    Scratch m(d);
    for (int i = 0; i < d; ++i) m.ptr[i] = 0;
    for (Eigen::Index k = 0; k < mu.size(); ++k)
      for (int i = 0; i < d; ++i) m.ptr[i] += mu.weights[k] * mu.atoms(k, i);
    evaluate_mean(z, m.ptr, out);
    return;
  }
  Scratch g(d);
  for (int i = 0; i < d; ++i) g.ptr[i] = 0;
  if (family == InteractionFamily::abp_bias) {
    const int p = static_cast<int>(reaction.rows());
    Scratch buf(2 * p);
    double* xi = buf.ptr;
    double* grad = buf.ptr + p;
    for (int r = 0; r < p; ++r) {
      double s = 0;
      for (int j = 0; j < d; ++j) s += reaction(r, j) * z[j];
      xi[r] = s;
      grad[r] = 0;
    }
    const double norm = std::pow(2 * std::numbers::pi * epsilon, -0.5 * p);
    double rho = 0;
    for (Eigen::Index k = 0; k < mu.size(); ++k) {
      double r2 = 0;
      for (int r = 0; r < p; ++r) {
        double s = 0;
        for (int j = 0; j < d; ++j) s += reaction(r, j) * mu.atoms(k, j);
        double u = xi[r] - s;
        r2 += u * u;
      }
      double kval = mu.weights[k] * norm * std::exp(-r2 / (2 * epsilon));
      rho += kval;
      for (int r = 0; r < p; ++r) {
        double s = 0;
        for (int j = 0; j < d; ++j) s += reaction(r, j) * mu.atoms(k, j);
        grad[r] -= kval * (xi[r] - s) / epsilon;
      }
    }
    for (int j = 0; j < d; ++j) {
      double s = 0;
      for (int r = 0; r < p; ++r) s += reaction(r, j) * grad[r];
      g.ptr[j] = omega * s / (epsilon_prime + rho);
    }
  } else {
    // gaussian kernel gradient: grad W(u) = -2 alpha beta u exp(-beta|u|^2)
    for (Eigen::Index k = 0; k < mu.size(); ++k) {
      double r2 = 0;
      for (int i = 0; i < d; ++i) {
        double u = z[i] - mu.atoms(k, i);
        r2 += u * u;
      }
      double c = -2 * alpha * beta * mu.weights[k] * std::exp(-beta * r2);
      for (int i = 0; i < d; ++i) g.ptr[i] += c * (z[i] - mu.atoms(k, i));
    }
    if (family == InteractionFamily::gaussian_repulsion) {
      for (int i = 0; i < d; ++i) out[i] = -g.ptr[i];
      return;
    }
  }
  for (int i = 0; i < d; ++i) {
    double s = 0;
    for (int j = 0; j < d; ++j) s += output(i, j) * g.ptr[j];
    out[i] = s;
  }
}

Vector InteractionField::operator()(const Vector& z, const EmpiricalMeasure& mu) const {
  require_dim(z.size(), dim, "interaction argument");
  if (mu.size() == 0) throw Error("interaction against an empty measure");
  require_dim(mu.dim(), dim, "interaction measure");
  Vector out(dim);
  evaluate(z.data(), mu, out.data());
  return out;
}

Vector evaluate_interaction(const InteractionField& field, const Vector& z,
                            const EmpiricalMeasure& mu) {
  return field(z, mu);
}

// ---- diffusion, init, config ----

DiffusionMatrix::DiffusionMatrix(Matrix m) : M(std::move(m)) {
  if (M.rows() != M.cols()) throw ConfigError("model.diffusion", "M must be square");
  Eigen::JacobiSVD<Matrix> svd(M);
  norm = M.size() ? svd.singularValues()[0] : 0.0;
  frob2 = M.squaredNorm();
  diagonal = M.isDiagonal(0.0);
}

DiffusionMatrix DiffusionMatrix::scaled_identity(int d, double s) {
  return DiffusionMatrix(Matrix(s * Matrix::Identity(d, d)));
}

InitialLaw InitialLaw::point(const Vector& c) {
  InitialLaw l;
  l.kind = InitKind::point;
  l.center = c;
  return l;
}

InitialLaw InitialLaw::ball(const Vector& c, double r) {
  InitialLaw l;
  l.kind = InitKind::ball;
  l.center = c;
  l.radius = r;
  return l;
}

int InitialLaw::dim() const {
  return kind == InitKind::empirical ? empirical.dim() : static_cast<int>(center.size());
}

Cloud InitialLaw::sample(Eigen::Index n, Rng& rng) const {
  const int d = dim();
  Cloud out(n, d);
  switch (kind) {
    case InitKind::point:
      for (Eigen::Index i = 0; i < n; ++i) out.row(i) = center.transpose();
      break;
    case InitKind::ball:
      for (Eigen::Index i = 0; i < n; ++i)
        out.row(i) = (center + random_in_ball(d, radius, rng)).transpose();
      break;
    case InitKind::empirical: {
      std::vector<double> cdf(empirical.size());
      double acc = 0;
      for (Eigen::Index k = 0; k < empirical.size(); ++k) cdf[k] = (acc += empirical.weights[k]);
      for (Eigen::Index i = 0; i < n; ++i) {
        double u = rng.uniform() * acc;
        auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        Eigen::Index k = std::min<Eigen::Index>(it - cdf.begin(), empirical.size() - 1);
        out.row(i) = empirical.atoms.row(k);
      }
      break;
    }
  }
  return out;
}

double InitialLaw::support_radius(const Vector& c) const {
  switch (kind) {
    case InitKind::point: return (center - c).norm();
    case InitKind::ball: return (center - c).norm() + radius;
    case InitKind::empirical: {
      double r = 0;
      for (Eigen::Index k = 0; k < empirical.size(); ++k)
        r = std::max(r, (empirical.atoms.row(k).transpose() - c).norm());
      return r;
    }
  }
  return 0;
}

double ModelConfig::theta() const {
  return temperature.value_or(0.5 * diffusion.norm * diffusion.norm);
}

void ModelConfig::validate() const {
  drift.validate();
  interaction.validate();
  const int d = drift.dim;
  if (interaction.dim != d) throw ConfigError("model.interaction", "dimension disagrees with drift");
  if (diffusion.dim() != d) throw ConfigError("model.diffusion", "dimension disagrees with drift");
  if (init.dim() != d) throw ConfigError("model.init", "dimension disagrees with drift");
  if (!(sigma >= 0) || !std::isfinite(sigma)) throw ConfigError("model.sigma", "sigma must be >= 0");
  if (temperature && !(*temperature > 0))
    throw ConfigError("model.temperature_factor", "must be positive");
  if (declared && !(declared->rho > declared->kappa && declared->kappa >= 0))
    throw ConfigError("model.declared", "need rho > kappa >= 0");
  if (kernel.kind == KernelKind::exponential && !(kernel.rate > 0))
    throw ConfigError("model.kernel.rate", "rate must be positive");
  if (init.kind == InitKind::ball && !(init.radius >= 0))
    throw ConfigError("model.init.radius", "radius must be >= 0");
}

ModelConfig ModelConfig::with_sigma(double s) const {
  ModelConfig c = *this;
  c.sigma = s;
  return c;
}

ModelConfig ModelConfig::with_kernel(const MemoryKernel& k) const {
  ModelConfig c = *this;
  c.kernel = k;
  return c;
}

void frozen_drift(const ModelConfig& c, const double* z, const double* v, double* out) {
  const int d = c.dim();
  Scratch b(d);
  c.drift.evaluate(z, out);
  c.interaction.evaluate_point(z, v, b.ptr);
  for (int i = 0; i < d; ++i) out[i] += b.ptr[i];
}

Vector frozen_drift(const ModelConfig& c, const Vector& z, const Vector& v) {
  require_dim(z.size(), c.dim(), "frozen drift");
  require_dim(v.size(), c.dim(), "frozen drift");
  Vector out(c.dim());
  frozen_drift(c, z.data(), v.data(), out.data());
  return out;
}

// ---- dissipativity probe ----

namespace {

struct ProbeSample {
  double a;  // |z-y|^2
  double w;  // W2^2 of the measure pair
  double g;  // (z-y).(F(z,nu) - F(y,nu'))
};

double two_atom_w2sq(const Cloud& u, const Cloud& v) {
  double straight = 0.5 * ((u.row(0) - v.row(0)).squaredNorm() + (u.row(1) - v.row(1)).squaredNorm());
  double crossed = 0.5 * ((u.row(0) - v.row(1)).squaredNorm() + (u.row(1) - v.row(0)).squaredNorm());
  return std::min(straight, crossed);
}

}  // namespace

DissipativityReport probe_dissipativity(const ModelConfig& config, std::size_t sample_count,
                                        double radius, Rng& rng) {
  if (sample_count < 100) throw Error("probe_dissipativity: sample_count must be >= 100");
  config.validate();
  const int d = config.dim();
  const Vector lam_hat = config.init.kind == InitKind::empirical ? config.init.empirical.mean()
                                                                  : config.init.center;
  std::vector<ProbeSample> samples;
  samples.reserve(sample_count + 4 * d + 8);
  double lip_pos = 0, lip_meas = 0;
  Vector fz(d), fy(d), bz(d), by(d), bz2(d);

  auto eval = [&](const Vector& z, const EmpiricalMeasure& nu, Vector& out, Vector& b) {
    config.drift.evaluate(z.data(), out.data());
    config.interaction.evaluate(z.data(), nu, b.data());
    out += b;
  };
  auto add = [&](const Vector& z, const Vector& y, const EmpiricalMeasure& nu,
                 const EmpiricalMeasure& nu2, double w) {
    eval(z, nu, fz, bz);
    eval(y, nu2, fy, by);
    Vector dz = z - y;
    samples.push_back({dz.squaredNorm(), w, dz.dot(fz - fy)});
    // empirical Lipschitz constants of b
    if (w == 0 && dz.squaredNorm() > 0) {
      lip_pos = std::max(lip_pos, (bz - by).norm() / dz.norm());
    }
    if (w > 0) {
      config.interaction.evaluate(z.data(), nu2, bz2.data());
      lip_meas = std::max(lip_meas, (bz - bz2).norm() / std::sqrt(w));
    }
  };

  for (std::size_t s = 0; s < sample_count; ++s) {
    Vector z = random_in_ball(d, radius, rng);
    Vector y = random_in_ball(d, radius, rng);
    switch (s % 3) {
      case 0: {
        auto nu = EmpiricalMeasure::point(random_in_ball(d, radius, rng));
        add(z, y, nu, nu, 0.0);
        break;
      }
      case 1: {
        Vector u = random_in_ball(d, radius, rng), v = random_in_ball(d, radius, rng);
        add(z, y, EmpiricalMeasure::point(u), EmpiricalMeasure::point(v), (u - v).squaredNorm());
        break;
      }
      default: {
        Cloud u(2, d), v(2, d);
        for (int k = 0; k < 2; ++k) {
          u.row(k) = random_in_ball(d, radius, rng).transpose();
          v.row(k) = random_in_ball(d, radius, rng).transpose();
        }
        add(z, y, EmpiricalMeasure(u), EmpiricalMeasure(v), two_atom_w2sq(u, v));
        break;
      }
    }
  }
  // deterministic pairs (z, lambda-hat) with z on the sphere
  {
    auto at_lam = EmpiricalMeasure::point(lam_hat);
    for (int i = 0; i < d; ++i) {
      for (double sgn : {-1.0, 1.0}) {
        Vector z = lam_hat;
        z[i] += sgn * radius;
        add(z, lam_hat, at_lam, at_lam, 0.0);
        add(z, lam_hat, EmpiricalMeasure::point(z), at_lam, radius * radius);
      }
    }
  }

  DissipativityReport rep;
  rep.samples = samples.size();
  rep.lipschitz_position = lip_pos;
  rep.lipschitz_measure = lip_meas;

  double rho_max = std::numeric_limits<double>::infinity();
  for (const auto& p : samples)
    if (p.w == 0 && p.a > 0) rho_max = std::min(rho_max, -p.g / p.a);
  rep.rho_max = rho_max;

  auto kappa_of = [&](double rho) {
    double k = 0;
    for (const auto& p : samples)
      if (p.w > 0) k = std::max(k, (p.g + rho * p.a) / p.w);
    return k;
  };

  if (!(rho_max > 0)) {
    rep.rho = 0;
    rep.kappa = kappa_of(0);
    for (const auto& p : samples)
      if (p.g > rep.kappa * p.w + 1e-12) ++rep.violations;
    rep.feasible = false;
    return rep;
  }
  double hi = std::isfinite(rho_max) ? rho_max : 1e6;
  // rho - kappa(rho) is concave
  double lo = 0, h = hi;
  for (int it = 0; it < 200; ++it) {
    double m1 = lo + (h - lo) / 3, m2 = h - (h - lo) / 3;
    if (m1 - kappa_of(m1) < m2 - kappa_of(m2)) lo = m1;
    else h = m2;
  }
  double best_rho = 0.5 * (lo + h);
  double best = best_rho - kappa_of(best_rho);
  for (double cand : {0.0, hi}) {
    double v = cand - kappa_of(cand);
    if (v > best) {
      best = v;
      best_rho = cand;
    }
  }
  // ties: push rho to the right end of the optimal plateau
  const double tol = 1e-12 * std::max(1.0, std::abs(best));
  if (hi - kappa_of(hi) >= best - tol) {
    best_rho = hi;
  } else {
    double a = best_rho, b = hi;
    for (int it = 0; it < 200; ++it) {
      double m = 0.5 * (a + b);
      if (m - kappa_of(m) >= best - tol) a = m;
      else b = m;
    }
    best_rho = a;
  }
  rep.rho = best_rho;
  rep.kappa = kappa_of(best_rho);
  for (const auto& p : samples) {
    double slack = 1e-10 * (1 + std::abs(p.g) + rep.rho * p.a + rep.kappa * p.w);
    if (p.g > -rep.rho * p.a + rep.kappa * p.w + slack) ++rep.violations;
  }
  rep.feasible = rep.rho > rep.kappa && rep.violations == 0;
  return rep;
}

}  // namespace sidlab

namespace sidlab {

ModelConfig change_coordinates(const ModelConfig& c, const Matrix& D) {
  if (c.interaction.family != InteractionFamily::zero)
    throw Error("change_coordinates: only interaction-free models are supported");
  if (c.drift.has_change()) throw Error("change_coordinates: drift is already wrapped");
  ModelConfig out = c;
  out.drift = c.drift.with_change_of_variable(D);
  const Matrix& Dinv = out.drift.change_inv;
  out.diffusion = DiffusionMatrix(Matrix(Dinv * c.diffusion.M));
  // keep the energy scale of the original noise
  out.temperature = c.theta();
  switch (c.init.kind) {
    case InitKind::point: out.init = InitialLaw::point(Dinv * c.init.center); break;
    case InitKind::empirical:
      out.init.empirical.atoms = (c.init.empirical.atoms * Dinv.transpose()).eval();
      break;
    case InitKind::ball: throw Error("change_coordinates: ball initial laws are not supported");
  }
  out.declared.reset();
  return out;
}

}  // namespace sidlab
