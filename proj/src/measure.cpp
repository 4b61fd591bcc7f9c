#include "sidlab/measure.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace sidlab {

EmpiricalMeasure::EmpiricalMeasure(Cloud positions) : atoms(std::move(positions)) {
  if (atoms.rows() < 1) throw Error("empirical measure needs at least one atom");
  weights = Vector::Constant(atoms.rows(), 1.0 / static_cast<double>(atoms.rows()));
}

EmpiricalMeasure::EmpiricalMeasure(Cloud positions, Vector w)
    : atoms(std::move(positions)), weights(std::move(w)) {
  if (atoms.rows() < 1) throw Error("empirical measure needs at least one atom");
  require_dim(weights.size(), atoms.rows(), "measure weights");
  if ((weights.array() < 0).any()) throw Error("negative measure weight");
  if (std::abs(weights.sum() - 1.0) > 1e-12) throw Error("measure weights must sum to 1");
  if (!atoms.allFinite()) throw Error("non-finite atom coordinates");
}

EmpiricalMeasure EmpiricalMeasure::point(const Vector& x) {
  EmpiricalMeasure m;
  m.atoms = x.transpose();
  m.weights = Vector::Ones(1);
  return m;
}

Vector EmpiricalMeasure::mean() const { return (atoms.transpose() * weights).eval(); }

bool EmpiricalMeasure::has_uniform_weights() const {
  const double u = 1.0 / static_cast<double>(size());
  return ((weights.array() - u).abs() <= 1e-12).all();
}

// ---- snapshots ----

void SnapshotStore::push(double t, EmpiricalMeasure m) {
  if (!times_.empty() && !(t > times_.back()))
    throw Error("snapshot times must be strictly increasing");
  means_.push_back(m.mean());
  times_.push_back(t);
  measures_.push_back(std::move(m));
  if (capacity_ > 1 && times_.size() > capacity_) thin();
}

// drop every second snapshot in the older half, keeping the first one
void SnapshotStore::thin() {
  const std::size_t half = times_.size() / 2;
  std::vector<double> t;
  std::vector<EmpiricalMeasure> m;
  std::vector<Vector> mu;
  for (std::size_t j = 0; j < times_.size(); ++j) {
    if (j < half && j % 2 == 1) continue;
    t.push_back(times_[j]);
    m.push_back(std::move(measures_[j]));
    mu.push_back(std::move(means_[j]));
  }
  times_ = std::move(t);
  measures_ = std::move(m);
  means_ = std::move(mu);
  ++passes_;
}

EmpiricalMeasure mixture(const SnapshotStore& store, const MemoryKernel& kernel, double t) {
  if (store.empty()) throw Error("mixture: empty snapshot store");
  if (t < store.times().front()) throw Error("mixture: t before first snapshot");
  if (kernel.kind == KernelKind::dirac) return store.latest();
  auto w = kernel_weights(kernel, store.times(), t);
  Eigen::Index total = 0;
  for (std::size_t s = 0; s < w.size(); ++s)
    if (w[s] > 0) total += store.measures()[s].size();
  const int d = store.latest().dim();
  Cloud atoms(total, d);
  Vector weights(total);
  Eigen::Index row = 0;
  for (std::size_t s = 0; s < w.size(); ++s) {
    if (!(w[s] > 0)) continue;
    const auto& m = store.measures()[s];
    atoms.middleRows(row, m.size()) = m.atoms;
    weights.segment(row, m.size()) = w[s] * m.weights;
    row += m.size();
  }
  weights /= weights.sum();
  return EmpiricalMeasure(std::move(atoms), std::move(weights));
}

Vector mixture_mean(const SnapshotStore& store, const MemoryKernel& kernel, double t) {
  if (store.empty()) throw Error("mixture: empty snapshot store");
  auto w = kernel_weights(kernel, store.times(), t);
  Vector m = Vector::Zero(store.means().front().size());
  for (std::size_t s = 0; s < w.size(); ++s)
    if (w[s] > 0) m += w[s] * store.means()[s];
  return m;
}

double second_moment_about(const EmpiricalMeasure& mu, const Vector& point) {
  require_dim(point.size(), mu.dim(), "second moment point");
  double s = 0;
  for (Eigen::Index k = 0; k < mu.size(); ++k)
    s += mu.weights[k] * (mu.atoms.row(k).transpose() - point).squaredNorm();
  return s;
}

// ---- assignment ----

std::vector<int> solve_assignment(const Matrix& cost) {
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n) throw DimensionError("assignment cost must be square");
  const double inf = std::numeric_limits<double>::infinity();
  // potentials, 1-based with a dummy column 0
  std::vector<double> u(n + 1, 0), v(n + 1, 0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      int i0 = p[j0], j1 = 0;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> col(n);
  for (int j = 1; j <= n; ++j) col[p[j] - 1] = j - 1;
  return col;
}

namespace {

// split atoms so that every copy carries weight 1/L
bool split_counts(const Vector& w, int L, std::vector<int>& counts) {
  counts.resize(w.size());
  int total = 0;
  for (Eigen::Index k = 0; k < w.size(); ++k) {
    double x = w[k] * L;
    double r = std::round(x);
    if (std::abs(x - r) > 1e-7) return false;
    counts[k] = static_cast<int>(r);
    total += counts[k];
  }
  return total == L;
}

Cloud expand(const EmpiricalMeasure& m, const std::vector<int>& counts, int L) {
  Cloud out(L, m.dim());
  int row = 0;
  for (Eigen::Index k = 0; k < m.size(); ++k)
    for (int c = 0; c < counts[k]; ++c) out.row(row++) = m.atoms.row(k);
  return out;
}

}  // namespace

double w2_exact_small(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  require_dim(nu.dim(), mu.dim(), "w2 measures");
  Cloud a, b;
  int L = 0;
  if (mu.size() == nu.size() && mu.has_uniform_weights() && nu.has_uniform_weights()) {
    if (mu.size() > kExactAtomCap) throw Error("w2_exact_small: atom cap exceeded");
    a = mu.atoms;
    b = nu.atoms;
    L = static_cast<int>(mu.size());
  } else {
    std::vector<int> ca, cb;
    const int start = static_cast<int>(std::max(mu.size(), nu.size()));
    for (int l = start; l <= kExactAtomCap; ++l) {
      if (split_counts(mu.weights, l, ca) && split_counts(nu.weights, l, cb)) {
        L = l;
        break;
      }
    }
    if (L == 0) throw Error("w2_exact_small: atom cap exceeded after splitting");
    a = expand(mu, ca, L);
    b = expand(nu, cb, L);
  }
  Matrix cost(L, L);
  for (int i = 0; i < L; ++i)
    for (int j = 0; j < L; ++j) cost(i, j) = (a.row(i) - b.row(j)).squaredNorm();
  auto col = solve_assignment(cost);
  double total = 0;
  for (int i = 0; i < L; ++i) total += cost(i, col[i]);
  return std::sqrt(std::max(0.0, total / L));
}

namespace {

double w2sq_1d_sorted(std::vector<std::pair<double, double>> a,
                      std::vector<std::pair<double, double>> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double ra = a[0].second, rb = b[0].second, total = 0;
  while (i < a.size() && j < b.size()) {
    double m = std::min(ra, rb);
    double diff = a[i].first - b[j].first;
    total += m * diff * diff;
    ra -= m;
    rb -= m;
    if (ra <= 1e-14) {
      if (++i < a.size()) ra = a[i].second;
    }
    if (rb <= 1e-14) {
      if (++j < b.size()) rb = b[j].second;
    }
  }
  return total;
}

std::vector<std::pair<double, double>> projected(const EmpiricalMeasure& m, const Vector& dir) {
  std::vector<std::pair<double, double>> out(m.size());
  for (Eigen::Index k = 0; k < m.size(); ++k)
    out[k] = {m.atoms.row(k).dot(dir.transpose()), m.weights[k]};
  return out;
}

}  // namespace

double w2_1d(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  if (mu.dim() != 1 || nu.dim() != 1) throw DimensionError("w2_1d needs d = 1");
  Vector e = Vector::Ones(1);
  return std::sqrt(std::max(0.0, w2sq_1d_sorted(projected(mu, e), projected(nu, e))));
}

double w2_matched(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  require_dim(nu.dim(), mu.dim(), "w2 measures");
  if (mu.size() != nu.size()) throw Error("w2_matched: atom counts differ");
  if (((mu.weights - nu.weights).array().abs() > 1e-12).any())
    throw Error("w2_matched: weights differ");
  double s = 0;
  for (Eigen::Index k = 0; k < mu.size(); ++k)
    s += mu.weights[k] * (mu.atoms.row(k) - nu.atoms.row(k)).squaredNorm();
  return std::sqrt(s);
}

double w2_sliced(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, int projections, Rng& rng) {
  require_dim(nu.dim(), mu.dim(), "w2 measures");
  if (projections < 1) throw Error("w2_sliced: need at least one projection");
  const int d = mu.dim();
  double acc = 0;
  for (int p = 0; p < projections; ++p) {
    Vector dir(d);
    for (int i = 0; i < d; ++i) dir[i] = rng.normal();
    dir.normalize();
    acc += w2sq_1d_sorted(projected(mu, dir), projected(nu, dir));
  }
  return std::sqrt(acc / projections);
}

// ---- text table ----

void write_measure(std::ostream& os, const EmpiricalMeasure& mu) {
  os << "# sidlab-measure v1\n";
  os << "# atoms " << mu.size() << " dim " << mu.dim() << "\n";
  char buf[64];
  for (Eigen::Index k = 0; k < mu.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", mu.weights[k]);
    os << buf;
    for (int i = 0; i < mu.dim(); ++i) {
      std::snprintf(buf, sizeof buf, " %.17g", mu.atoms(k, i));
      os << buf;
    }
    os << "\n";
  }
}

EmpiricalMeasure read_measure(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("# sidlab-measure v1", 0) != 0)
    throw Error("measure file: missing or unsupported format tag");
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::vector<double> r;
    double x;
    while (ss >> x) r.push_back(x);
    if (r.size() < 2) throw Error("measure file: row needs weight and coordinates");
    if (!rows.empty() && r.size() != rows.front().size())
      throw Error("measure file: ragged rows");
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw Error("measure file: no atoms");
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  const int d = static_cast<int>(rows.front().size()) - 1;
  Cloud atoms(n, d);
  Vector w(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    w[k] = rows[k][0];
    for (int i = 0; i < d; ++i) atoms(k, i) = rows[k][i + 1];
  }
  if (std::abs(w.sum() - 1.0) > 1e-12) w /= w.sum();
  return EmpiricalMeasure(std::move(atoms), std::move(w));
}

EmpiricalMeasure read_measure_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open measure file " + path);
  return read_measure(f);
}

}  // namespace sidlab
