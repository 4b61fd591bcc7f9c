#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sidlab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
// particle clouds: one particle per row, contiguous rows
using Cloud = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  std::string key;
  ConfigError(std::string key_path, const std::string& what)
      : Error(key_path.empty() ? what : key_path + ": " + what), key(std::move(key_path)) {}
};

struct ExplosionError : Error {
  std::size_t step;
  std::size_t particle;
  ExplosionError(std::size_t step_index, std::size_t particle_index)
      : Error("explosion guard hit at step " + std::to_string(step_index) + ", particle " +
              std::to_string(particle_index)),
        step(step_index),
        particle(particle_index) {}
};

struct InsufficientDataError : Error {
  using Error::Error;
};

inline void require_dim(Eigen::Index got, Eigen::Index want, const char* what) {
  if (got != want)
    throw DimensionError(std::string(what) + ": dimension " + std::to_string(got) + ", expected " +
                         std::to_string(want));
}

}  // namespace sidlab
