#include "sidlab/config_io.hpp"

#include <cstdio>

namespace sidlab {

namespace {

const Json& need(const Json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError(path + "." + key, "missing key");
  return *it;
}

double num(const Json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  return j.get<double>();
}

double num_or(const Json& j, const std::string& key, const std::string& path, double fallback) {
  auto it = j.find(key);
  return it == j.end() ? fallback : num(*it, path + "." + key);
}

std::string str(const Json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path, "expected a string");
  return j.get<std::string>();
}

std::size_t count_or(const Json& j, const std::string& key, const std::string& path,
                     std::size_t fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_number_integer() || it->get<long long>() < 0)
    throw ConfigError(path + "." + key, "expected a nonnegative integer");
  return it->get<std::size_t>();
}

template <class F>
auto at_path(const std::string& path, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(path, e.what());
  }
}

}  // namespace

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json r = Json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) r.push_back(m(i, k));
    rows.push_back(r);
  }
  return rows;
}

Json vector_to_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Matrix matrix_from_json(const Json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a nonempty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (!j[0].is_array()) throw ConfigError(path, "expected rows");
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Json& r = j[i];
    if (!r.is_array() || static_cast<Eigen::Index>(r.size()) != cols)
      throw ConfigError(path + "[" + std::to_string(i) + "]", "ragged matrix row");
    for (Eigen::Index k = 0; k < cols; ++k)
      m(i, k) = num(r[k], path + "[" + std::to_string(i) + "][" + std::to_string(k) + "]");
  }
  return m;
}

Vector vector_from_json(const Json& j, const std::string& path) {
  if (j.is_number()) return Vector::Constant(1, j.get<double>());
  if (!j.is_array()) throw ConfigError(path, "expected an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[i] = num(j[i], path + "[" + std::to_string(i) + "]");
  return v;
}

// ---- model ----

namespace {

Json potential_json(const Potential& p) {
  Json j{{"center", vector_to_json(p.center)}, {"hessian", matrix_to_json(p.hessian)}};
  if (p.quartic != 0) j["quartic"] = p.quartic;
  return j;
}

Potential potential_from(const Json& j, const std::string& path) {
  Vector c = vector_from_json(need(j, "center", path), path + ".center");
  const int d = static_cast<int>(c.size());
  Potential p;
  if (j.contains("hessian")) {
    Matrix K = matrix_from_json(j["hessian"], path + ".hessian");
    if (K.rows() != d || K.cols() != d) throw ConfigError(path + ".hessian", "must be d x d");
    p = Potential::quadratic(K, c);
  } else if (j.contains("rho")) {
    p = Potential::isotropic(d, num(j["rho"], path + ".rho"), c);
  } else {
    throw ConfigError(path, "needs 'hessian' or 'rho'");
  }
  p.quartic = num_or(j, "quartic", path, 0.0);
  return p;
}

}  // namespace

Json to_json(const ModelConfig& c) {
  Json m;
  m["name"] = c.name;
  m["sigma"] = c.sigma;
  if (c.temperature) m["temperature_factor"] = *c.temperature;
  if (c.declared) m["declared"] = {{"rho", c.declared->rho}, {"kappa", c.declared->kappa}};

  const auto& a = c.drift;
  Json d{{"family", to_string(a.family)}};
  switch (a.family) {
    case DriftFamily::overdamped: d["potential"] = potential_json(a.potential); break;
    case DriftFamily::kinetic:
      d["potential"] = potential_json(a.potential);
      d["friction"] = a.friction;
      break;
    case DriftFamily::colored_noise:
      d["potential"] = potential_json(a.potential);
      d["coupling"] = matrix_to_json(a.coupling);
      d["noise_drift"] = matrix_to_json(a.noise_drift);
      break;
    case DriftFamily::generalized_langevin:
      d["potential"] = potential_json(a.potential);
      d["friction"] = a.friction;
      d["coupling"] = matrix_to_json(a.coupling);
      break;
    case DriftFamily::custom_quadratic:
      d["coupling"] = matrix_to_json(a.coupling);
      d["center"] = vector_to_json(a.center);
      break;
  }
  if (a.has_change()) d["change_of_variable"] = matrix_to_json(a.change);
  m["drift"] = d;

  const auto& b = c.interaction;
  Json i{{"family", to_string(b.family)}};
  switch (b.family) {
    case InteractionFamily::zero: break;
    case InteractionFamily::convolution:
      i["shape"] = b.shape == KernelShape::quadratic ? "quadratic" : "gaussian";
      i["alpha"] = b.alpha;
      i["beta"] = b.beta;
      i["output"] = matrix_to_json(b.output);
      break;
    case InteractionFamily::quadratic_attractive:
    case InteractionFamily::quadratic_repulsive: i["alpha"] = b.alpha; break;
    case InteractionFamily::gaussian_repulsion:
      i["alpha"] = b.alpha;
      i["beta"] = b.beta;
      break;
    case InteractionFamily::abp_bias:
      i["omega"] = b.omega;
      i["epsilon"] = b.epsilon;
      i["epsilon_prime"] = b.epsilon_prime;
      i["reaction"] = matrix_to_json(b.reaction);
      i["output"] = matrix_to_json(b.output);
      break;
    case InteractionFamily::two_species:
      i["species"] = {b.species[0], b.species[1], b.species[2], b.species[3]};
      break;
  }
  m["interaction"] = i;
  m["diffusion"] = matrix_to_json(c.diffusion.M);
  Json k{{"kind", to_string(c.kernel.kind)}};
  if (c.kernel.kind == KernelKind::exponential) k["rate"] = c.kernel.rate;
  m["kernel"] = k;

  Json init;
  switch (c.init.kind) {
    case InitKind::point:
      init = {{"kind", "point"}, {"center", vector_to_json(c.init.center)}};
      break;
    case InitKind::ball:
      init = {{"kind", "ball"}, {"center", vector_to_json(c.init.center)}, {"radius", c.init.radius}};
      break;
    case InitKind::empirical: {
      init = {{"kind", "empirical"}};
      if (!c.init.file.empty()) init["file"] = c.init.file;
      Json atoms = Json::array();
      for (Eigen::Index r = 0; r < c.init.empirical.size(); ++r) {
        Json row = Json::array();
        row.push_back(c.init.empirical.weights[r]);
        for (int q = 0; q < c.init.empirical.dim(); ++q) row.push_back(c.init.empirical.atoms(r, q));
        atoms.push_back(row);
      }
      init["atoms"] = atoms;
      break;
    }
  }
  m["init"] = init;
  return m;
}

ModelConfig model_from_json(const Json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  ModelConfig c;
  if (j.contains("name")) c.name = str(j["name"], path + ".name");
  c.sigma = num(need(j, "sigma", path), path + ".sigma");
  if (j.contains("temperature_factor"))
    c.temperature = num(j["temperature_factor"], path + ".temperature_factor");
  if (j.contains("declared")) {
    const Json& dj = j["declared"];
    c.declared = Dissipativity{num(need(dj, "rho", path + ".declared"), path + ".declared.rho"),
                               num(need(dj, "kappa", path + ".declared"), path + ".declared.kappa")};
  }

  // drift
  const std::string dp = path + ".drift";
  const Json& dj = need(j, "drift", path);
  const auto fam = at_path(dp + ".family", [&] {
    return drift_family_from_string(str(need(dj, "family", dp), dp + ".family"));
  });
  at_path(dp, [&] {
    switch (fam) {
      case DriftFamily::overdamped:
        c.drift = DriftField::overdamped(potential_from(need(dj, "potential", dp), dp + ".potential"));
        break;
      case DriftFamily::kinetic:
        c.drift = DriftField::kinetic(potential_from(need(dj, "potential", dp), dp + ".potential"),
                                      num(need(dj, "friction", dp), dp + ".friction"));
        break;
      case DriftFamily::colored_noise:
        c.drift = DriftField::colored_noise(
            potential_from(need(dj, "potential", dp), dp + ".potential"),
            matrix_from_json(need(dj, "coupling", dp), dp + ".coupling"),
            matrix_from_json(need(dj, "noise_drift", dp), dp + ".noise_drift"));
        break;
      case DriftFamily::generalized_langevin:
        c.drift = DriftField::generalized_langevin(
            potential_from(need(dj, "potential", dp), dp + ".potential"),
            num(need(dj, "friction", dp), dp + ".friction"),
            matrix_from_json(need(dj, "coupling", dp), dp + ".coupling"));
        break;
      case DriftFamily::custom_quadratic:
        c.drift = DriftField::custom_quadratic(matrix_from_json(need(dj, "coupling", dp), dp + ".coupling"),
                                               vector_from_json(need(dj, "center", dp), dp + ".center"));
        break;
    }
    if (dj.contains("change_of_variable"))
      c.drift = c.drift.with_change_of_variable(
          matrix_from_json(dj["change_of_variable"], dp + ".change_of_variable"));
    return 0;
  });
  const int d = c.drift.dim;

  // interaction
  const std::string ip = path + ".interaction";
  if (j.contains("interaction")) {
    const Json& ij = j["interaction"];
    const auto ifam = at_path(ip + ".family", [&] {
      return interaction_family_from_string(str(need(ij, "family", ip), ip + ".family"));
    });
    auto opt_matrix = [&](const char* key) {
      return ij.contains(key) ? matrix_from_json(ij[key], ip + "." + key) : Matrix();
    };
    at_path(ip, [&] {
      switch (ifam) {
        case InteractionFamily::zero: c.interaction = InteractionField::zero(d); break;
        case InteractionFamily::convolution: {
          std::string shape = ij.contains("shape") ? str(ij["shape"], ip + ".shape") : "quadratic";
          if (shape != "quadratic" && shape != "gaussian")
            throw ConfigError(ip + ".shape", "expected 'quadratic' or 'gaussian'");
          c.interaction = InteractionField::convolution(
              d, shape == "quadratic" ? KernelShape::quadratic : KernelShape::gaussian,
              num(need(ij, "alpha", ip), ip + ".alpha"), num_or(ij, "beta", ip, 1.0), opt_matrix("output"));
          break;
        }
        case InteractionFamily::quadratic_attractive:
          c.interaction = InteractionField::quadratic_attractive(d, num(need(ij, "alpha", ip), ip + ".alpha"));
          break;
        case InteractionFamily::quadratic_repulsive:
          c.interaction = InteractionField::quadratic_repulsive(d, num(need(ij, "alpha", ip), ip + ".alpha"));
          break;
        case InteractionFamily::gaussian_repulsion:
          c.interaction = InteractionField::gaussian_repulsion(
              d, num(need(ij, "alpha", ip), ip + ".alpha"), num_or(ij, "beta", ip, 1.0));
          break;
        case InteractionFamily::abp_bias:
          c.interaction = InteractionField::abp_bias(
              d, num(need(ij, "omega", ip), ip + ".omega"), num_or(ij, "epsilon", ip, 1.0),
              num_or(ij, "epsilon_prime", ip, 1.0),
              matrix_from_json(need(ij, "reaction", ip), ip + ".reaction"), opt_matrix("output"));
          break;
        case InteractionFamily::two_species: {
          Vector s = vector_from_json(need(ij, "species", ip), ip + ".species");
          if (s.size() != 4) throw ConfigError(ip + ".species", "expected [c11, c12, c21, c22]");
          if (d % 2) throw ConfigError(ip, "two-species needs an even dimension");
          c.interaction = InteractionField::two_species(d / 2, s[0], s[1], s[2], s[3]);
          break;
        }
      }
      return 0;
    });
  } else {
    c.interaction = InteractionField::zero(d);
  }

  // diffusion: matrix or scalar multiple of the identity
  const Json& mj = need(j, "diffusion", path);
  at_path(path + ".diffusion", [&] {
    if (mj.is_number()) c.diffusion = DiffusionMatrix::scaled_identity(d, mj.get<double>());
    else c.diffusion = DiffusionMatrix(matrix_from_json(mj, path + ".diffusion"));
    return 0;
  });

  if (j.contains("kernel")) {
    const Json& kj = j["kernel"];
    c.kernel.kind = kernel_kind_from_string(str(need(kj, "kind", path + ".kernel"), path + ".kernel.kind"));
    c.kernel.rate = num_or(kj, "rate", path + ".kernel", 1.0);
  }

  const std::string np = path + ".init";
  if (j.contains("init")) {
    const Json& nj = j["init"];
    std::string kind = nj.contains("kind") ? str(nj["kind"], np + ".kind") : "point";
    if (kind == "point") {
      c.init = InitialLaw::point(vector_from_json(need(nj, "center", np), np + ".center"));
    } else if (kind == "ball") {
      c.init = InitialLaw::ball(vector_from_json(need(nj, "center", np), np + ".center"),
                                num(need(nj, "radius", np), np + ".radius"));
    } else if (kind == "empirical") {
      c.init.kind = InitKind::empirical;
      if (nj.contains("file")) c.init.file = str(nj["file"], np + ".file");
      at_path(np, [&] {
        if (nj.contains("atoms")) {
          Matrix rows = matrix_from_json(nj["atoms"], np + ".atoms");
          Vector w = rows.col(0);
          Cloud atoms = rows.rightCols(rows.cols() - 1);
          if (std::abs(w.sum() - 1.0) > 1e-12) w /= w.sum();
          c.init.empirical = EmpiricalMeasure(atoms, w);
        } else if (!c.init.file.empty()) {
          c.init.empirical = read_measure_file(c.init.file);
        } else {
          throw ConfigError(np, "empirical law needs 'atoms' or 'file'");
        }
        return 0;
      });
    } else {
      throw ConfigError(np + ".kind", "expected point, ball or empirical");
    }
  } else {
    c.init = InitialLaw::point(Vector::Zero(d));
  }
  at_path(path, [&] {
    c.validate();
    return 0;
  });
  return c;
}

// ---- settings, domains ----

Json to_json(const IntegratorSettings& s) {
  return Json{{"dt", s.dt},
              {"horizon", s.horizon},
              {"particles", s.particles},
              {"snapshot_stride", s.snapshot_stride},
              {"snapshot_capacity", s.snapshot_capacity},
              {"record_stride", s.record_stride},
              {"seed", s.seed}};
}

IntegratorSettings settings_from_json(const Json& j, const std::string& path) {
  IntegratorSettings s;
  if (j.is_null()) return s;
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  s.dt = num_or(j, "dt", path, s.dt);
  s.horizon = num_or(j, "horizon", path, s.horizon);
  s.particles = count_or(j, "particles", path, s.particles);
  s.snapshot_stride = count_or(j, "snapshot_stride", path, s.snapshot_stride);
  s.snapshot_capacity = count_or(j, "snapshot_capacity", path, s.snapshot_capacity);
  s.record_stride = count_or(j, "record_stride", path, s.record_stride);
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer())
      throw ConfigError(path + ".seed", "expected an integer");
    s.seed = j["seed"].get<std::uint64_t>();
  }
  at_path(path, [&] {
    s.validate();
    return 0;
  });
  return s;
}

Json to_json(const Domain& d) {
  switch (d.kind) {
    case DomainKind::ball:
      return Json{{"kind", "ball"}, {"center", vector_to_json(d.center)}, {"radius", d.radius}};
    case DomainKind::product:
      return Json{{"kind", "product"},
                  {"center", vector_to_json(d.center)},
                  {"radius", d.radius},
                  {"dim", d.dim}};
    case DomainKind::halfspaces:
      return Json{{"kind", "halfspaces"},
                  {"normals", matrix_to_json(d.normals)},
                  {"offsets", vector_to_json(d.offsets)},
                  {"reference", vector_to_json(d.center)}};
  }
  return {};
}

Domain domain_from_json(const Json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  std::string kind = j.contains("kind") ? str(j["kind"], path + ".kind") : "ball";
  return at_path(path, [&] {
    if (kind == "ball")
      return Domain::ball(vector_from_json(need(j, "center", path), path + ".center"),
                          num(need(j, "radius", path), path + ".radius"));
    if (kind == "product")
      return Domain::product(vector_from_json(need(j, "center", path), path + ".center"),
                             num(need(j, "radius", path), path + ".radius"),
                             static_cast<int>(num(need(j, "dim", path), path + ".dim")));
    if (kind == "halfspaces")
      return Domain::halfspaces(matrix_from_json(need(j, "normals", path), path + ".normals"),
                                vector_from_json(need(j, "offsets", path), path + ".offsets"),
                                vector_from_json(need(j, "reference", path), path + ".reference"));
    throw ConfigError(path + ".kind", "expected ball, product or halfspaces");
  });
}

// ---- hashing, equality, overrides ----

std::uint64_t model_hash(const ModelConfig& c) {
  Json j = to_json(c);
  j.erase("sigma");
  j.erase("name");
  const std::string s = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

bool same(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
}

}  // namespace

bool equivalent(const ModelConfig& a, const ModelConfig& b) {
  const auto& p = a.drift.potential;
  const auto& q = b.drift.potential;
  const auto& x = a.interaction;
  const auto& y = b.interaction;
  return a.name == b.name && a.sigma == b.sigma && a.temperature == b.temperature &&
         a.declared.has_value() == b.declared.has_value() &&
         (!a.declared || (a.declared->rho == b.declared->rho && a.declared->kappa == b.declared->kappa)) &&
         a.drift.family == b.drift.family && a.drift.dim == b.drift.dim && same(p.center, q.center) &&
         same(p.hessian, q.hessian) && p.quartic == q.quartic && a.drift.friction == b.drift.friction &&
         same(a.drift.coupling, b.drift.coupling) && same(a.drift.noise_drift, b.drift.noise_drift) &&
         same(a.drift.center, b.drift.center) && same(a.drift.change, b.drift.change) &&
         same(a.drift.change_inv, b.drift.change_inv) && x.family == y.family && x.dim == y.dim &&
         x.shape == y.shape && x.alpha == y.alpha && x.beta == y.beta && same(x.output, y.output) &&
         x.omega == y.omega && x.epsilon == y.epsilon && x.epsilon_prime == y.epsilon_prime &&
         same(x.reaction, y.reaction) && x.species == y.species && same(a.diffusion.M, b.diffusion.M) &&
         a.kernel.kind == b.kernel.kind && a.kernel.rate == b.kernel.rate && a.init.kind == b.init.kind &&
         same(a.init.center, b.init.center) && a.init.radius == b.init.radius &&
         same(a.init.empirical.atoms, b.init.empirical.atoms) &&
         same(a.init.empirical.weights, b.init.empirical.weights);
}

void apply_override(Json& root, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError(assignment, "override must look like key.path=value");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  Json value = Json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  Json* node = &root;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError(key, "empty key component");
    if (!node->is_object()) {
      if (node->is_null()) *node = Json::object();
      else throw ConfigError(key, "'" + part + "' is below a non-object value");
    }
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

}  // namespace sidlab
