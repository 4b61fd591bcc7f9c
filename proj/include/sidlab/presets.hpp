#pragma once

#include "sidlab/exits.hpp"
#include "sidlab/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace sidlab {

struct PresetInfo {
  ModelConfig model;
  Domain domain;
  std::optional<double> predicted_H;  // energy units, when a closed form exists
  Matrix change_of_variable;          // D for the contraction check, empty if not needed
  std::string description;
};

std::vector<std::string> preset_names();
PresetInfo preset(const std::string& name);

}  // namespace sidlab
