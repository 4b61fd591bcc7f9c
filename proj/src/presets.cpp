#include "sidlab/presets.hpp"

#include <cmath>

namespace sidlab {

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

Matrix diag(std::initializer_list<double> v) { return vec(v).asDiagonal(); }

// overdamped, d = 1, U = rho/2 z^2, M = sqrt(2) so that theta = 1 is the natural unit
PresetInfo overdamped_quadratic() {
  PresetInfo p;
  ModelConfig& c = p.model;
  c.name = "overdamped-quadratic";
  c.drift = DriftField::overdamped(Potential::isotropic(1, 2.0, vec({0.0})));
  c.interaction = InteractionField::zero(1);
  c.diffusion = DiffusionMatrix::scaled_identity(1, std::sqrt(2.0));
  c.temperature = 1.0;
  c.init = InitialLaw::point(vec({0.0}));
  c.sigma = 0.5;
  c.declared = Dissipativity{2.0, 0.0};
  p.domain = Domain::ball(vec({0.0}), 1.0);
  p.predicted_H = 1.0;
  p.description = "1-d Ornstein-Uhlenbeck, exit from (-1, 1)";
  return p;
}

PresetInfo overdamped_quadratic_interacting() {
  PresetInfo p = overdamped_quadratic();
  ModelConfig& c = p.model;
  c.name = "overdamped-quadratic-interacting";
  c.interaction = InteractionField::quadratic_repulsive(1, 0.45);
  // rho - 2 alpha on the position, 2 alpha on the measure; A2 holds with (rho - alpha, alpha)
  c.declared = Dissipativity{0.65, 0.45};
  p.predicted_H = 0.55;
  p.description = "same well with quadratic self-repulsion alpha = 0.45";
  return p;
}

PresetInfo kinetic_quadratic() {
  PresetInfo p;
  ModelConfig& c = p.model;
  c.name = "kinetic-quadratic";
  c.drift = DriftField::kinetic(Potential::isotropic(1, 1.0, vec({0.5})), 1.5);
  c.interaction = InteractionField::zero(2);
  c.diffusion = DiffusionMatrix(diag({0.0, std::sqrt(3.0)}));
  c.temperature = 1.0;
  c.init = InitialLaw::point(vec({0.5, 0.0}));
  c.sigma = 0.5;
  p.domain = Domain::product(vec({0.5}), 1.0, 2);
  p.predicted_H = 0.5;
  p.change_of_variable.resize(2, 2);
  p.change_of_variable << 0.9295160030897803, -0.3098386676965935, -0.3098386676965935,
      1.3942740046346702;
  p.description = "underdamped Langevin in V = (x - 1/2)^2 / 2, gamma = 1.5";
  return p;
}

PresetInfo colored_ou() {
  PresetInfo p;
  ModelConfig& c = p.model;
  c.name = "colored-ou";
  Matrix B(1, 1), F(1, 1);
  B << std::sqrt(2.0);
  F << -1.0;
  c.drift = DriftField::colored_noise(Potential::isotropic(1, 1.0, vec({0.0})), B, F);
  c.interaction = InteractionField::zero(2);
  c.diffusion = DiffusionMatrix(diag({0.0, std::sqrt(2.0)}));
  c.temperature = 1.0;
  c.init = InitialLaw::point(vec({0.0, 0.0}));
  c.sigma = 0.5;
  p.domain = Domain::product(vec({0.0}), 1.0, 2);
  p.change_of_variable.resize(2, 2);
  p.change_of_variable << 1.5950959387923405, -0.34976508218352687, -0.34976508218352687,
      1.1004534159238566;
  p.description = "quadratic well driven by an Ornstein-Uhlenbeck noise";
  return p;
}

PresetInfo gle_k3() {
  PresetInfo p;
  ModelConfig& c = p.model;
  c.name = "gle-k3";
  Matrix B(2, 2);
  B << 0.0, -1.0, 1.0, 1.0;
  c.drift = DriftField::generalized_langevin(Potential::isotropic(1, 1.0, vec({0.0})), 1.0, B);
  c.interaction = InteractionField::zero(3);
  c.diffusion = DiffusionMatrix(diag({0.0, 0.0, std::sqrt(2.0)}));
  c.temperature = 1.0;
  c.init = InitialLaw::point(vec({0.0, 0.0, 0.0}));
  c.sigma = 0.5;
  p.domain = Domain::product(vec({0.0}), 1.0, 3);
  p.change_of_variable.resize(3, 3);
  p.change_of_variable << 0.6751292831407049, -0.10525024427035179, 0.15604777250056354,
      -0.10525024427035182, 0.6545415859207043, -0.22743299795077365, 0.15604777250056354,
      -0.22743299795077365, 0.9702923187317603;
  p.description = "generalized Langevin with one auxiliary variable (third-order system)";
  return p;
}

PresetInfo abp_demo() {
  PresetInfo p;
  ModelConfig& c = p.model;
  c.name = "abp-demo";
  Matrix P(1, 2);
  P << 1.0, 0.0;
  c.drift = DriftField::overdamped(Potential::isotropic(2, 2.0, vec({0.0, 0.0})));
  c.interaction = InteractionField::abp_bias(2, 0.2, 1.0, 1.0, P, -Matrix::Identity(2, 2));
  c.diffusion = DiffusionMatrix::scaled_identity(2, std::sqrt(2.0));
  c.temperature = 1.0;
  c.init = InitialLaw::ball(vec({0.0, 0.0}), 0.1);
  c.sigma = 0.5;
  p.domain = Domain::ball(vec({0.0, 0.0}), 1.0);
  p.description = "2-d well with an adaptive biasing force along x";
  return p;
}

PresetInfo two_species_demo() {
  PresetInfo p;
  ModelConfig& c = p.model;
  c.name = "two-species-demo";
  c.drift = DriftField::overdamped(Potential::isotropic(2, 2.0, vec({0.5, -0.5})));
  c.interaction = InteractionField::two_species(1, 0.3, -0.2, -0.2, 0.3);
  c.diffusion = DiffusionMatrix::scaled_identity(2, std::sqrt(2.0));
  c.temperature = 1.0;
  c.init = InitialLaw::point(vec({0.5, -0.5}));
  c.sigma = 0.5;
  p.domain = Domain::ball(vec({5.0 / 12.0, -5.0 / 12.0}), 1.0);
  p.description = "two coupled species in separate wells";
  return p;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"overdamped-quadratic", "overdamped-quadratic-interacting", "kinetic-quadratic",
          "colored-ou",           "gle-k3",                           "abp-demo",
          "two-species-demo"};
}

PresetInfo preset(const std::string& name) {
  PresetInfo p;
  if (name == "overdamped-quadratic") p = overdamped_quadratic();
  else if (name == "overdamped-quadratic-interacting") p = overdamped_quadratic_interacting();
  else if (name == "kinetic-quadratic") p = kinetic_quadratic();
  else if (name == "colored-ou") p = colored_ou();
  else if (name == "gle-k3") p = gle_k3();
  else if (name == "abp-demo") p = abp_demo();
  else if (name == "two-species-demo") p = two_species_demo();
  else throw ConfigError("preset", "unknown preset '" + name + "'");
  p.model.validate();
  return p;
}

}  // namespace sidlab
