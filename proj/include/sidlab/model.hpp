#pragma once

#include "sidlab/kernel.hpp"
#include "sidlab/measure.hpp"
#include "sidlab/rng.hpp"
#include "sidlab/types.hpp"

#include <array>
#include <optional>
#include <string>

namespace sidlab {

// U(z) = 1/2 (z-c)^T K (z-c) + q/4 |z-c|^4
struct Potential {
  Vector center;
  Matrix hessian;
  double quartic = 0.0;

  static Potential quadratic(const Matrix& K, const Vector& c);
  static Potential isotropic(int d, double rho, const Vector& c);

  int dim() const { return static_cast<int>(center.size()); }
  double value(const double* z) const;
  void gradient(const double* z, double* out) const;
  double value(const Vector& z) const;
  Vector gradient(const Vector& z) const;
};

enum class DriftFamily { overdamped, kinetic, colored_noise, generalized_langevin, custom_quadratic };
std::string to_string(DriftFamily f);
DriftFamily drift_family_from_string(const std::string& s);

struct DriftField {
  DriftFamily family = DriftFamily::overdamped;
  int dim = 0;
  Potential potential;   // U, or V on the position block
  double friction = 0;   // gamma
  Matrix coupling;       // colored: B (n x m); gle: B block on (y,w); custom: A in -A(z-c)
  Matrix noise_drift;    // colored: linear F (m x m)
  Vector center;         // custom only
  Matrix change;         // D; empty when absent
  Matrix change_inv;

  static DriftField overdamped(Potential U);
  static DriftField kinetic(Potential V, double gamma);
  static DriftField colored_noise(Potential V, Matrix B, Matrix F);
  static DriftField generalized_langevin(Potential V, double gamma, Matrix B);
  static DriftField custom_quadratic(Matrix A, Vector c);
  DriftField with_change_of_variable(const Matrix& D) const;

  bool has_change() const { return change.size() > 0; }
  int position_dim() const;
  void validate() const;

  // raw field before D-wrapping
  void evaluate_raw(const double* z, double* out) const;
  // hot path, z and out of length dim, no checks
  void evaluate(const double* z, double* out) const;
  Vector operator()(const Vector& z) const;
};

Vector evaluate_drift(const DriftField& field, const Vector& z);

enum class InteractionFamily {
  zero,
  convolution,
  quadratic_attractive,
  quadratic_repulsive,
  gaussian_repulsion,
  abp_bias,
  two_species,
};
std::string to_string(InteractionFamily f);
InteractionFamily interaction_family_from_string(const std::string& s);

enum class KernelShape { quadratic, gaussian };

struct InteractionField {
  InteractionFamily family = InteractionFamily::zero;
  int dim = 0;
  KernelShape shape = KernelShape::quadratic;  // convolution: W(u) = alpha|u|^2 or alpha exp(-beta|u|^2)
  double alpha = 0;
  double beta = 1;
  Matrix output;  // A, defaults to -I
  // abp
  double omega = 0;
  double epsilon = 1;
  double epsilon_prime = 1;
  Matrix reaction;  // xi(z) = P z, p x d
  // two-species, flattened (x, y) with d = 2n; b_ij(u) = c_ij u
  std::array<double, 4> species{0, 0, 0, 0};

  static InteractionField zero(int d);
  static InteractionField convolution(int d, KernelShape s, double alpha, double beta, Matrix A);
  static InteractionField quadratic_repulsive(int d, double alpha);
  static InteractionField quadratic_attractive(int d, double alpha);
  static InteractionField gaussian_repulsion(int d, double alpha, double beta);
  static InteractionField abp_bias(int d, double omega, double eps, double eps_prime, Matrix P,
                                   Matrix A);
  static InteractionField two_species(int n, double c11, double c12, double c21, double c22);

  // the field only sees the measure through its mean
  bool mean_only() const;
  void validate() const;

  // hot path: out = b(z, mu); no checks
  void evaluate(const double* z, const EmpiricalMeasure& mu, double* out) const;
  void evaluate_mean(const double* z, const double* mean, double* out) const;
  // b(z, delta_y)
  void evaluate_point(const double* z, const double* y, double* out) const;
  Vector operator()(const Vector& z, const EmpiricalMeasure& mu) const;
};

Vector evaluate_interaction(const InteractionField& field, const Vector& z,
                            const EmpiricalMeasure& mu);

struct DiffusionMatrix {
  Matrix M;
  double norm = 0;   // largest singular value
  double frob2 = 0;  // |M|_F^2
  bool diagonal = false;

  DiffusionMatrix() = default;
  explicit DiffusionMatrix(Matrix m);
  static DiffusionMatrix scaled_identity(int d, double s);
  int dim() const { return static_cast<int>(M.rows()); }
};

enum class InitKind { point, ball, empirical };

struct InitialLaw {
  InitKind kind = InitKind::point;
  Vector center;
  double radius = 0;
  std::string file;           // empirical source, informative
  EmpiricalMeasure empirical;  // loaded atoms

  static InitialLaw point(const Vector& c);
  static InitialLaw ball(const Vector& c, double r);
  int dim() const;
  // n draws, rows; empirical law is sampled with replacement
  Cloud sample(Eigen::Index n, Rng& rng) const;
  // radius of a ball about c containing the support
  double support_radius(const Vector& c) const;
};

struct Dissipativity {
  double rho = 0;
  double kappa = 0;
};

struct ModelConfig {
  std::string name;
  DriftField drift;
  InteractionField interaction;
  DiffusionMatrix diffusion;
  MemoryKernel kernel;
  InitialLaw init;
  double sigma = 0;
  std::optional<double> temperature;  // theta in energy units; default |M|^2/2
  std::optional<Dissipativity> declared;

  int dim() const { return drift.dim; }
  double theta() const;
  void validate() const;
  ModelConfig with_sigma(double s) const;
  ModelConfig with_kernel(const MemoryKernel& k) const;
};

// the same dynamics in coordinates z = D z~ (drift wrapped, M -> D^-1 M);
// interaction-free models with point or empirical initial laws only
ModelConfig change_coordinates(const ModelConfig& c, const Matrix& D);

// a(z) + b(z, delta_v)
void frozen_drift(const ModelConfig& c, const double* z, const double* v, double* out);
Vector frozen_drift(const ModelConfig& c, const Vector& z, const Vector& v);

struct DissipativityReport {
  double rho = 0;        // chosen rho-hat
  double kappa = 0;      // chosen kappa-hat
  double rho_max = 0;    // measure-free contraction rate (pairs with W2 = 0)
  double lipschitz_position = 0;  // empirical kappa_1
  double lipschitz_measure = 0;   // empirical kappa_2
  std::size_t samples = 0;
  std::size_t violations = 0;     // of the chosen (rho, kappa) on the sample
  bool feasible = false;
};

// least-violation estimate of the A2 constants over random pairs in ball(0, radius)
DissipativityReport probe_dissipativity(const ModelConfig& config, std::size_t sample_count,
                                        double radius, Rng& rng);

}  // namespace sidlab
