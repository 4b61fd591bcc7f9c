#pragma once

#include "sidlab/kernel.hpp"
#include "sidlab/rng.hpp"
#include "sidlab/types.hpp"

#include <iosfwd>
#include <vector>

namespace sidlab {

struct EmpiricalMeasure {
  Cloud atoms;     // n x d
  Vector weights;  // n, sums to 1

  EmpiricalMeasure() = default;
  explicit EmpiricalMeasure(Cloud positions);
  EmpiricalMeasure(Cloud positions, Vector w);
  static EmpiricalMeasure point(const Vector& x);

  int dim() const { return static_cast<int>(atoms.cols()); }
  Eigen::Index size() const { return atoms.rows(); }
  Vector mean() const;
  bool has_uniform_weights() const;
};

// time-indexed snapshots of the particle cloud; single writer
class SnapshotStore {
 public:
  explicit SnapshotStore(std::size_t capacity = 0) : capacity_(capacity) {}

  void push(double t, EmpiricalMeasure m);
  bool empty() const { return times_.empty(); }
  std::size_t size() const { return times_.size(); }
  std::size_t capacity() const { return capacity_; }
  const std::vector<double>& times() const { return times_; }
  const std::vector<EmpiricalMeasure>& measures() const { return measures_; }
  const EmpiricalMeasure& latest() const { return measures_.back(); }
  const std::vector<Vector>& means() const { return means_; }
  std::size_t thinning_passes() const { return passes_; }

 private:
  void thin();

  std::size_t capacity_;
  std::vector<double> times_;
  std::vector<EmpiricalMeasure> measures_;
  std::vector<Vector> means_;
  std::size_t passes_ = 0;
};

// exact W2 by optimal assignment; rational weights are split into equal atoms up to the cap
constexpr Eigen::Index kExactAtomCap = 512;
double w2_exact_small(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu);
double w2_1d(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu);
double w2_matched(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu);
double w2_sliced(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, int projections, Rng& rng);

// min-cost perfect assignment on a square cost matrix; returns column for each row
std::vector<int> solve_assignment(const Matrix& cost);

EmpiricalMeasure mixture(const SnapshotStore& store, const MemoryKernel& kernel, double t);
// kernel-weighted mean of the stored snapshot means
Vector mixture_mean(const SnapshotStore& store, const MemoryKernel& kernel, double t);

double second_moment_about(const EmpiricalMeasure& mu, const Vector& point);

// "# sidlab-measure v1" then one row per atom: weight x1 .. xd
void write_measure(std::ostream& os, const EmpiricalMeasure& mu);
EmpiricalMeasure read_measure(std::istream& is);
EmpiricalMeasure read_measure_file(const std::string& path);

}  // namespace sidlab
