#include "sidlab/harness.hpp"

#include "sidlab/engine.hpp"
#include "sidlab/fixedpoint.hpp"
#include "sidlab/parallel.hpp"
#include "sidlab/presets.hpp"
#include "sidlab/quasipotential.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace fs = std::filesystem;

namespace sidlab {

std::vector<std::string> subcommands() {
  return {"simulate", "campaign", "couple", "lambda", "quasipotential", "gronwall", "toychain", "check"};
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Json parse_json_file(const std::string& path) {
  const std::string text = read_file(path);
  Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ConfigError(path, "not valid JSON");
  return j;
}

// files written by one run; removed unless committed
class OutputSet {
 public:
  explicit OutputSet(std::string dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }
  ~OutputSet() {
    if (committed_) return;
    for (const auto& f : files_) {
      std::error_code ec;
      fs::remove(f, ec);
    }
  }
  std::string write(const std::string& name, const std::string& content) {
    const std::string path = (fs::path(dir_) / name).string();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + path + "'");
    files_.push_back(path);
    out << content;
    if (!out) throw Error("write failed for '" + path + "'");
    return path;
  }
  const std::vector<std::string>& files() const { return files_; }
  void commit() { committed_ = true; }

 private:
  std::string dir_;
  std::vector<std::string> files_;
  bool committed_ = false;
};

const Json& section(const Json& cfg, const char* key) {
  static const Json empty = Json::object();
  auto it = cfg.find(key);
  if (it == cfg.end()) return empty;
  if (!it->is_object()) throw ConfigError(key, "expected an object");
  return *it;
}

double get_num(const Json& s, const std::string& path, const char* key, double fallback) {
  auto it = s.find(key);
  if (it == s.end()) return fallback;
  if (!it->is_number()) throw ConfigError(path + "." + key, "expected a number");
  return it->get<double>();
}

std::size_t get_count(const Json& s, const std::string& path, const char* key, std::size_t fallback) {
  auto it = s.find(key);
  if (it == s.end()) return fallback;
  if (!it->is_number_integer() || it->get<long long>() < 0)
    throw ConfigError(path + "." + key, "expected a nonnegative integer");
  return it->get<std::size_t>();
}

bool get_bool(const Json& s, const std::string& path, const char* key, bool fallback) {
  auto it = s.find(key);
  if (it == s.end()) return fallback;
  if (!it->is_boolean()) throw ConfigError(path + "." + key, "expected true or false");
  return it->get<bool>();
}

std::vector<double> get_list(const Json& s, const std::string& path, const char* key) {
  auto it = s.find(key);
  if (it == s.end()) return {};
  Vector v = vector_from_json(*it, path + "." + key);
  return {v.data(), v.data() + v.size()};
}

struct Context {
  Json cfg;
  std::uint64_t seed = 0;
  std::size_t workers = 0;
  ModelConfig model;
  std::optional<Domain> domain;
  std::optional<double> predicted_H;
  Matrix change;
  IntegratorSettings settings;
};

Context make_context(const Json& cfg, std::size_t workers) {
  Context c;
  c.cfg = cfg;
  c.workers = workers;
  if (cfg.contains("seed")) {
    if (!cfg["seed"].is_number_integer()) throw ConfigError("seed", "expected an integer");
    c.seed = cfg["seed"].get<std::uint64_t>();
  }
  if (cfg.contains("model")) c.model = model_from_json(cfg["model"]);
  if (cfg.contains("domain")) c.domain = domain_from_json(cfg["domain"]);
  if (cfg.contains("predicted_H")) c.predicted_H = get_num(cfg, "", "predicted_H", 0);
  if (cfg.contains("change_of_variable"))
    c.change = matrix_from_json(cfg["change_of_variable"], "change_of_variable");
  c.settings = settings_from_json(cfg.contains("integrator") ? cfg["integrator"] : Json(), "integrator");
  c.settings.seed = c.seed;
  return c;
}

void need_model(const Context& c) {
  if (!c.cfg.contains("model")) throw ConfigError("model", "this subcommand needs a model (use --preset)");
}

const Domain& need_domain(const Context& c) {
  if (!c.domain) throw ConfigError("domain", "this subcommand needs a domain");
  return *c.domain;
}

std::string vec_text(const Vector& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(v[i]);
  return s;
}

// ---- subcommands; each returns (file name, content) pairs ----

using Artifacts = std::vector<std::pair<std::string, std::string>>;

Artifacts cmd_simulate(const Context& c, std::ostream& log) {
  need_model(c);
  auto res = simulate_particles(c.model, c.settings);
  std::ostringstream traj, snaps;
  write_trajectory(traj, res.batch);
  snaps << "# sidlab-snapshots v1\n# model " << c.model.name << " hash " << hex64(model_hash(c.model))
        << "\n# columns time mean...\n";
  for (std::size_t k = 0; k < res.store.size(); ++k)
    snaps << fmt(res.store.times()[k]) << " " << vec_text(res.store.means()[k]) << "\n";
  log << "simulated " << c.settings.particles << " particles to t = " << c.settings.horizon << "\n";
  return {{"trajectory.txt", traj.str()}, {"snapshots.txt", snaps.str()}};
}

std::vector<double> campaign_sigmas(const Context& c, const Json& s) {
  auto sig = get_list(s, "campaign", "sigma");
  if (!sig.empty()) return sig;
  auto var = get_list(s, "campaign", "sigma2");
  for (double v : var) {
    if (!(v > 0)) throw ConfigError("campaign.sigma2", "entries must be positive");
    sig.push_back(std::sqrt(v));
  }
  if (!sig.empty()) return sig;
  const auto H = s.contains("predicted_H") ? std::optional<double>(get_num(s, "campaign", "predicted_H", 0))
                                           : c.predicted_H;
  if (!H) throw ConfigError("campaign.sigma", "give sigma, sigma2, or a predicted barrier");
  return default_sigma_grid(*H, get_count(s, "campaign", "points", 4), c.model.theta());
}

Artifacts cmd_campaign(const Context& c, std::ostream& log) {
  need_model(c);
  const Json& s = section(c.cfg, "campaign");
  CampaignOptions o;
  o.sigma = campaign_sigmas(c, s);
  o.replicas = get_count(s, "campaign", "replicas", o.replicas);
  if (s.contains("mode")) o.mode = campaign_mode_from_string(s["mode"].get<std::string>());
  o.settings = c.settings;
  o.predicted_H = s.contains("predicted_H") ? std::optional<double>(get_num(s, "campaign", "predicted_H", 0))
                                            : c.predicted_H;
  o.horizon_multiplier = get_num(s, "campaign", "horizon_multiplier", o.horizon_multiplier);
  o.fallback_horizon = get_num(s, "campaign", "fallback_horizon", o.fallback_horizon);
  o.allow_coarse_dt = get_bool(s, "campaign", "allow_coarse_dt", o.allow_coarse_dt);
  o.min_uncensored = get_count(s, "campaign", "min_uncensored", o.min_uncensored);
  if (s.contains("lambda")) o.lambda = vector_from_json(s["lambda"], "campaign.lambda");
  o.workers = c.workers;
  auto res = run_campaign(c.model, need_domain(c), o);
  std::ostringstream os;
  write_campaign(os, res);
  if (res.fit)
    log << "fitted barrier " << res.fit->barrier << " [" << res.fit->barrier_lo << ", "
        << res.fit->barrier_hi << "]\n";
  else
    log << "no fit: " << res.fit_error << "\n";

  PlotSeries pts{"regression", {"x", "mean_log_tau", "se", "usable"}, {}};
  if (res.fit)
    for (const auto& p : res.fit->points) pts.rows.push_back({p.x, p.mean_log, p.se, p.usable ? 1.0 : 0.0});
  std::ostringstream plot;
  write_plotdata(plot, {pts});
  return {{"campaign.txt", os.str()}, {"campaign.plot.txt", plot.str()}};
}

Artifacts cmd_couple(const Context& c, std::ostream& log) {
  need_model(c);
  const Json& s = section(c.cfg, "couple");
  const std::string partner = s.contains("partner") ? s["partner"].get<std::string>() : "same";
  if (partner != "same" && partner != "frozen") throw ConfigError("couple.partner", "expected same or frozen");
  ModelConfig b = c.model.with_sigma(get_num(s, "couple", "sigma_b", c.model.sigma));
  CouplingOptions o;
  if (partner == "frozen") o.frozen_b = find_lambda(c.model).lambda;
  if (c.model.declared) {
    o.rho = c.model.declared->rho;
    o.kappa = c.model.declared->kappa;
  }
  o.rho = get_num(s, "couple", "rho", o.rho);
  o.kappa = get_num(s, "couple", "kappa", o.kappa);
  const double offset = get_num(s, "couple", "offset", 0.5);
  const std::size_t runs = get_count(s, "couple", "runs", 1);
  std::ostringstream os;
  os << "# sidlab-coupling v1\n# model " << c.model.name << " hash " << hex64(model_hash(c.model))
     << " partner " << partner << " sigma_a " << fmt(c.model.sigma) << " sigma_b " << fmt(b.sigma)
     << " rho " << fmt(o.rho) << " kappa " << fmt(o.kappa) << "\n";
  PlotSeries gap{"coupling_gap", {"run", "time", "gap_sq", "w2_sq"}, {}};
  std::size_t v1 = 0, v2 = 0, n1 = 0, n2 = 0;
  for (std::size_t r = 0; r < runs; ++r) {
    o.replica = r;
    Rng rng(derive_stream(c.seed, {static_cast<std::uint64_t>(Purpose::init), 0, r}));
    Cloud ia = c.model.init.sample(static_cast<Eigen::Index>(c.settings.particles), rng);
    Cloud ib = b.init.sample(static_cast<Eigen::Index>(c.settings.particles), rng);
    ib.array() += offset;
    o.initial_a = ia;
    o.initial_b = ib;
    auto res = parallel_couple(c.model, b, c.settings, o);
    v1 += res.item1_violations;
    v2 += res.item2_violations;
    n1 += res.item1_checks;
    n2 += res.item2_checks;
    os << "# run " << r << " item1 " << res.item1_checks << " " << res.item1_violations << " "
       << fmt(res.item1_worst) << " item2 " << res.item2_checks << " " << res.item2_violations << " "
       << fmt(res.item2_worst) << "\n";
    for (std::size_t k = 0; k < res.times.size(); ++k)
      gap.rows.push_back({static_cast<double>(r), res.times[k], res.gap_sq[k], res.w2_sq[k]});
  }
  os << "# summary item1_checks " << n1 << " item1_violations " << v1 << " item2_checks " << n2
     << " item2_violations " << v2 << "\n# columns run time gap_sq w2_sq\n";
  for (const auto& row : gap.rows)
    os << static_cast<long>(row[0]) << " " << fmt(row[1]) << " " << fmt(row[2]) << " " << fmt(row[3]) << "\n";
  log << "coupling: item 1 " << v1 << "/" << n1 << " violations, item 2 " << v2 << "/" << n2 << "\n";
  std::ostringstream plot;
  write_plotdata(plot, {gap});
  return {{"coupling.txt", os.str()}, {"coupling.plot.txt", plot.str()}};
}

Artifacts cmd_lambda(const Context& c, std::ostream& log) {
  need_model(c);
  const Json& s = section(c.cfg, "lambda");
  FixedPointOptions o;
  o.tol = get_num(s, "lambda", "tol", o.tol);
  o.max_iter = static_cast<int>(get_count(s, "lambda", "max_iter", static_cast<std::size_t>(o.max_iter)));
  auto r = find_lambda(c.model, o);
  std::ostringstream os;
  os << "# sidlab-lambda v1\n# model " << c.model.name << " hash " << hex64(model_hash(c.model)) << "\n";
  os << "lambda " << vec_text(r.lambda) << "\n";
  os << "residual " << fmt(r.residual) << "\n";
  os << "iterations " << r.iterations << "\n";
  os << "converged " << (r.converged ? 1 : 0) << "\n";
  os << "contraction_ratio " << fmt(r.contraction_ratio()) << "\n";
  log << "lambda = " << r.lambda.transpose() << ", residual " << r.residual << "\n";
  return {{"lambda.txt", os.str()}};
}

std::vector<Vector> boundary_targets(const Domain& d, std::size_t count) {
  std::vector<Vector> out;
  const int p = d.position_dim();
  if (p == 1) {
    for (std::size_t k = 0; k < count; ++k) {
      Vector v = d.center;
      v[0] += (k % 2 ? -1.0 : 1.0) * d.radius;
      out.push_back(v);
    }
    return out;
  }
  for (std::size_t k = 0; k < count; ++k) {
    const double a = 2 * 3.14159265358979323846 * static_cast<double>(k) / static_cast<double>(count);
    Vector v = d.center;
    v[0] += d.radius * std::cos(a);
    v[1] += d.radius * std::sin(a);
    out.push_back(v);
  }
  return out;
}

Artifacts cmd_quasipotential(const Context& c, std::ostream& log) {
  need_model(c);
  const Domain& dom = need_domain(c);
  const Json& s = section(c.cfg, "quasipotential");
  const Vector lambda = find_lambda(c.model).lambda;
  std::ostringstream os;
  os << "# sidlab-quasipotential v1\n# model " << c.model.name << " hash " << hex64(model_hash(c.model))
     << "\nlambda " << vec_text(lambda) << "\n";
  std::optional<double> exact;
  try {
    exact = c.model.drift.family == DriftFamily::kinetic ? kinetic_H(c.model, lambda, dom)
                                                         : elliptic_H(c.model, lambda, dom);
    os << "closed_form_H " << fmt(*exact) << "\n";
  } catch (const Error& e) {
    os << "closed_form_H nan\n# closed form unavailable: " << e.what() << "\n";
  }
  if (c.predicted_H) os << "predicted_H " << fmt(*c.predicted_H) << "\n";

  Artifacts out;
  ActionOptions ao;
  ao.nodes = get_count(s, "quasipotential", "nodes", ao.nodes);
  ao.T_points = get_count(s, "quasipotential", "T_points", ao.T_points);
  ao.workers = c.workers;
  const std::size_t ntargets = get_count(s, "quasipotential", "targets", 8);
  os << "# columns target action T converged\n";
  try {
    const auto targets = boundary_targets(dom, ntargets);
    for (std::size_t k = 0; k < targets.size(); ++k) {
      auto r = minimize_action(c.model, lambda, targets[k], ao);
      os << "action " << vec_text(targets[k]) << " " << fmt(r.value) << " " << fmt(r.T) << " "
         << (r.converged ? 1 : 0) << "\n";
      std::ostringstream p;
      write_path(p, r.path, c.model.name);
      out.emplace_back("path_" + std::to_string(k) + ".txt", p.str());
    }
  } catch (const Error& e) {
    os << "# action minimization unavailable: " << e.what() << "\n";
  }
  if (c.model.drift.family == DriftFamily::overdamped && !c.model.drift.has_change() &&
      dom.kind != DomainKind::halfspaces) {
    auto rep = reduction_probe(c.model, lambda, dom, get_count(s, "quasipotential", "grid", 21));
    os << "reduction points " << rep.points << " violations " << rep.violations << " boundary "
       << rep.boundary_cases << " certified " << (rep.certified() ? 1 : 0) << "\n";
  }
  log << "quasipotential: closed form " << (exact ? fmt(*exact) : std::string("n/a")) << "\n";
  out.insert(out.begin(), {"quasipotential.txt", os.str()});
  return out;
}

Artifacts cmd_gronwall(const Context& c, std::ostream& log) {
  const Json& s = section(c.cfg, "gronwall");
  const std::size_t draws = get_count(s, "gronwall", "draws", 100);
  const double T = get_num(s, "gronwall", "T", 20);
  const double dt = get_num(s, "gronwall", "dt", 1e-3);
  const MemoryKernel kernels[] = {MemoryKernel::dirac(), MemoryKernel::uniform(), MemoryKernel::exponential(1.0)};
  std::ostringstream os;
  os << "# sidlab-gronwall v1\n# columns kernel draw alpha beta gamma f0 worst_margin tolerance ok depth\n";
  std::vector<std::vector<double>> rows(3 * draws);
  std::vector<int> ok(3 * draws);
  parallel_for(3 * draws, c.workers, [&](std::size_t task) {
    const std::size_t kk = task / draws, i = task % draws;
    Rng rng(derive_stream(c.seed, {static_cast<std::uint64_t>(Purpose::suite), i}));
    const double alpha = 0.5 + 2.5 * rng.uniform();
    const double beta = alpha * 0.9 * rng.uniform() + 1e-3;
    const double gamma = rng.uniform();
    const double f0 = 5 * rng.uniform();
    auto f = integrate_extremal(alpha, beta, gamma, kernels[kk], f0, T, dt);
    auto env = build_envelope(alpha, beta, kernels[kk], T, dt);
    auto rep = verify_domination(f, alpha, beta, gamma, env);
    rows[task] = {static_cast<double>(kk), static_cast<double>(i), alpha, beta, gamma, f0, rep.worst_margin,
                  rep.tolerance, rep.ok ? 1.0 : 0.0, static_cast<double>(env.depth)};
    ok[task] = rep.ok;
  });
  std::size_t passed = 0;
  for (std::size_t t = 0; t < rows.size(); ++t) {
    os << to_string(kernels[t / draws].kind);
    for (std::size_t q = 1; q < rows[t].size(); ++q) os << " " << fmt(rows[t][q]);
    os << "\n";
    passed += static_cast<std::size_t>(ok[t]);
  }
  os << "# summary passed " << passed << " of " << rows.size() << "\n";
  log << "gronwall: " << passed << "/" << rows.size() << " dominated\n";

  // overlays for one representative draw per kernel
  std::vector<PlotSeries> plots;
  for (const auto& k : kernels) {
    auto f = integrate_extremal(1.0, 0.5, 0.0, k, 1.0, T, dt);
    auto env = build_envelope(1.0, 0.5, k, T, dt);
    PlotSeries ps{"envelope_" + to_string(k.kind), {"time", "f", "envelope"}, {}};
    const std::size_t stride = std::max<std::size_t>(1, f.times.size() / 400);
    for (std::size_t q = 0; q < f.times.size(); q += stride) ps.rows.push_back({f.times[q], f.values[q], env.x[q]});
    plots.push_back(std::move(ps));
  }
  std::ostringstream plot;
  write_plotdata(plot, plots);
  return {{"gronwall.txt", os.str()}, {"gronwall.plot.txt", plot.str()}};
}

Artifacts cmd_toychain(const Context& c, std::ostream& log) {
  const Json& s = section(c.cfg, "toychain");
  ChainParams p;
  p.a01 = p.a10 = get_num(s, "toychain", "a", 1.0);
  p.alpha = get_num(s, "toychain", "alpha", 0.4);
  std::vector<double> s2 = get_list(s, "toychain", "sigma2");
  if (s2.empty()) s2 = {0.2, 0.15, 0.12, 0.1, 0.08};
  std::vector<double> sig;
  for (double v : s2) sig.push_back(std::sqrt(v));
  std::vector<double> centers = get_list(s, "toychain", "centers");
  if (centers.empty()) centers = {0.7, 0.9};
  const double delta = get_num(s, "toychain", "delta", 0.1);
  const std::size_t n = get_count(s, "toychain", "n", 10000);
  auto tab = exponent_spread(p, sig, n, centers, delta, c.seed);
  std::ostringstream os;
  os << "# sidlab-toychain v1\n# a " << fmt(p.a01) << " alpha " << fmt(p.alpha) << " delta " << fmt(delta)
     << " n " << n << "\n# columns sigma2 outside";
  for (double h : centers) os << " mass@" << fmt(h);
  os << "\n";
  std::vector<PlotSeries> plots;
  for (std::size_t j = 0; j < sig.size(); ++j) {
    os << fmt(s2[j]) << " " << fmt(tab.outside[j]);
    for (double m : tab.mass[j]) os << " " << fmt(m);
    os << "\n";
    // histogram of sigma^2 log tau, 60 bins over [0, 1.6 a]
    PlotSeries h{"exponent_hist_sigma2_" + fmt(s2[j]), {"bin_center", "density"}, {}};
    const int bins = 60;
    const double hi = 1.6 * p.a01, w = hi / bins;
    std::vector<double> cnt(bins, 0.0);
    for (double e : tab.exponents[j]) {
      const int b = static_cast<int>(std::floor(e / w));
      if (b >= 0 && b < bins) cnt[b] += 1;
    }
    for (int b = 0; b < bins; ++b)
      h.rows.push_back({(b + 0.5) * w, cnt[b] / (w * static_cast<double>(tab.exponents[j].size()))});
    plots.push_back(std::move(h));
  }
  log << "toychain: " << sig.size() << " noise levels, " << n << " samples each\n";
  std::ostringstream plot;
  write_plotdata(plot, plots);
  return {{"toychain.txt", os.str()}, {"toychain.plot.txt", plot.str()}};
}

Artifacts cmd_check(const Context& c, std::ostream& log) {
  need_model(c);
  const Json& s = section(c.cfg, "check");
  std::ostringstream os;
  os << "# sidlab-check v1\n# model " << c.model.name << " hash " << hex64(model_hash(c.model)) << "\n";
  const std::size_t samples = get_count(s, "check", "samples", 10000);
  const double radius = get_num(s, "check", "radius", 2.0);
  ModelConfig probed = c.model;
  if (c.change.size() > 0) {
    probed = change_coordinates(c.model, c.change);
    os << "# dissipativity probed in the supplied change of variable\n";
  }
  Rng rng(derive_stream(c.seed, {static_cast<std::uint64_t>(Purpose::probe)}));
  auto rep = probe_dissipativity(probed, samples, radius, rng);
  os << "dissipativity rho " << fmt(rep.rho) << " kappa " << fmt(rep.kappa) << " rho_max "
     << fmt(rep.rho_max) << " lipschitz_position " << fmt(rep.lipschitz_position)
     << " lipschitz_measure " << fmt(rep.lipschitz_measure) << " samples " << rep.samples
     << " violations " << rep.violations << " feasible " << (rep.feasible ? 1 : 0) << "\n";
  if (c.model.declared)
    os << "declared rho " << fmt(c.model.declared->rho) << " kappa " << fmt(c.model.declared->kappa) << "\n";
  auto fp = find_lambda(c.model);
  os << "lambda " << vec_text(fp.lambda) << " residual " << fmt(fp.residual) << " contraction_ratio "
     << fmt(fp.contraction_ratio()) << "\n";
  if (c.domain) {
    IntegratorSettings st = c.settings;
    st.particles = std::min<std::size_t>(st.particles, 64);
    auto inv = deterministic_invariance_check(c.model.with_sigma(0), *c.domain,
                                              get_num(s, "check", "T", 20.0), st);
    os << "invariance ok " << (inv.ok ? 1 : 0) << " start_inside " << (inv.start_inside ? 1 : 0)
       << " max_signed_distance " << fmt(inv.max_signed_distance) << " violations " << inv.violations << "\n";
    if (c.model.drift.family == DriftFamily::kinetic) {
      try {
        kinetic_H(c.model, fp.lambda, *c.domain);
        os << "inward_flow ok 1\n";
      } catch (const Error& e) {
        os << "inward_flow ok 0\n# " << e.what() << "\n";
      }
    }
  }
  log << "check: rho " << rep.rho << " kappa " << rep.kappa << ", " << rep.violations << " violations\n";
  return {{"check.txt", os.str()}};
}

Artifacts dispatch(const std::string& cmd, const Context& c, std::ostream& log) {
  if (cmd == "simulate") return cmd_simulate(c, log);
  if (cmd == "campaign") return cmd_campaign(c, log);
  if (cmd == "couple") return cmd_couple(c, log);
  if (cmd == "lambda") return cmd_lambda(c, log);
  if (cmd == "quasipotential") return cmd_quasipotential(c, log);
  if (cmd == "gronwall") return cmd_gronwall(c, log);
  if (cmd == "toychain") return cmd_toychain(c, log);
  if (cmd == "check") return cmd_check(c, log);
  throw ConfigError("command", "unknown subcommand '" + cmd + "'");
}

RunOutcome execute(const std::string& cmd, const Json& cfg, std::size_t workers, const std::string& out_dir,
                   std::ostream& log) {
  Context c = make_context(cfg, workers);
  auto artifacts = dispatch(cmd, c, log);
  OutputSet out(out_dir);
  Json manifest;
  manifest["format"] = kManifestTag;
  manifest["command"] = cmd;
  manifest["version"] = kSidlabVersion;
  manifest["seed"] = c.seed;
  manifest["workers"] = workers;
  manifest["config"] = cfg;
  if (cfg.contains("model")) manifest["model_hash"] = hex64(model_hash(c.model));
  Json files = Json::array();
  for (const auto& [name, content] : artifacts) {
    out.write(name, content);
    files.push_back({{"file", name}, {"fnv1a", hex64(fnv1a(content))}});
  }
  manifest["outputs"] = files;
  out.write("manifest.json", manifest.dump(2) + "\n");
  out.commit();
  return {0, out.files()};
}

}  // namespace

Json preset_config(const std::string& name) {
  const PresetInfo p = preset(name);
  Json j;
  j["preset"] = name;
  j["model"] = to_json(p.model);
  j["domain"] = to_json(p.domain);
  if (p.predicted_H) j["predicted_H"] = *p.predicted_H;
  if (p.change_of_variable.size() > 0) j["change_of_variable"] = matrix_to_json(p.change_of_variable);
  return j;
}

Json resolve_config(const RunRequest& req) {
  Json file = Json::object();
  if (!req.config_path.empty()) {
    file = parse_json_file(req.config_path);
    if (!file.is_object()) throw ConfigError(req.config_path, "config must be a JSON object");
    if (file.value("format", "") == kManifestTag) file = file["config"];
  }
  std::string name = req.preset;
  if (name.empty() && file.contains("preset")) name = file["preset"].get<std::string>();
  Json cfg = name.empty() ? Json::object() : preset_config(name);
  cfg.merge_patch(file);
  if (!name.empty()) cfg["preset"] = name;
  for (const auto& o : req.overrides) apply_override(cfg, o);
  if (req.seed) cfg["seed"] = *req.seed;
  if (!cfg.contains("seed")) cfg["seed"] = 0;
  return cfg;
}

RunOutcome run(const RunRequest& req, std::ostream& log) {
  const Json cfg = resolve_config(req);
  return execute(req.command, cfg, req.workers.value_or(default_workers()), req.out_dir, log);
}

RunOutcome rerun(const std::string& manifest_path, const std::string& out_dir, std::ostream& log) {
  const Json m = parse_json_file(manifest_path);
  if (m.value("format", "") != kManifestTag) throw ConfigError(manifest_path, "not a manifest");
  if (m.value("version", "") != kSidlabVersion)
    log << "warning: manifest written by version " << m.value("version", "?") << "\n";
  return execute(m.at("command").get<std::string>(), m.at("config"),
                 m.value("workers", std::size_t{1}), out_dir, log);
}

// ---- campaign files ----

void write_campaign(std::ostream& os, const ExitCampaignResult& r) {
  Json meta;
  meta["model"] = r.model;
  meta["model_hash"] = hex64(r.model_hash);
  meta["seed"] = r.seed;
  meta["mode"] = to_string(r.mode);
  meta["lambda"] = vector_to_json(r.lambda);
  meta["integrator"] = to_json(r.settings);
  meta["theta"] = r.theta;
  meta["predicted_H"] = r.predicted_H ? Json(*r.predicted_H) : Json();
  if (r.fit) {
    const auto& f = *r.fit;
    Json pts = Json::array();
    for (const auto& p : f.points)
      pts.push_back({{"sigma", p.sigma}, {"x", p.x}, {"mean_log", p.mean_log}, {"se", p.se},
                     {"used", p.used}, {"censored", p.censored}, {"usable", p.usable}});
    meta["fit"] = {{"slope", f.slope},       {"intercept", f.intercept}, {"slope_se", f.slope_se},
                   {"slope_lo", f.slope_lo}, {"slope_hi", f.slope_hi},   {"barrier", f.barrier},
                   {"barrier_lo", f.barrier_lo}, {"barrier_hi", f.barrier_hi}, {"points", pts}};
  } else {
    meta["fit"] = nullptr;
    meta["fit_error"] = r.fit_error;
  }
  os << kCampaignTag << "\n# meta " << meta.dump() << "\n# columns sigma horizon tau censored\n";
  for (const auto& s : r.samples)
    for (std::size_t i = 0; i < s.tau.size(); ++i)
      os << fmt(s.sigma) << " " << fmt(s.horizon) << " " << fmt(s.tau[i]) << " " << int(s.censored[i]) << "\n";
}

ExitCampaignResult read_campaign(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw Error("empty campaign file");
  if (line != kCampaignTag) {
    if (line.rfind("# sidlab-campaign", 0) == 0) throw Error("campaign file version mismatch: " + line);
    throw Error("not a campaign file");
  }
  ExitCampaignResult r;
  Json meta;
  std::map<double, std::size_t> index;
  while (std::getline(is, line)) {
    if (line.rfind("# meta ", 0) == 0) {
      meta = Json::parse(line.substr(7));
      continue;
    }
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    double sigma, horizon, tau;
    int cens;
    if (!(ls >> sigma >> horizon >> tau >> cens)) throw Error("malformed campaign row: " + line);
    auto it = index.find(sigma);
    if (it == index.end()) {
      it = index.emplace(sigma, r.samples.size()).first;
      r.samples.push_back({});
      r.samples.back().sigma = sigma;
      r.samples.back().horizon = horizon;
    }
    r.samples[it->second].tau.push_back(tau);
    r.samples[it->second].censored.push_back(static_cast<char>(cens));
  }
  if (meta.is_null()) throw Error("campaign file has no metadata line");
  r.model = meta.at("model").get<std::string>();
  r.model_hash = std::stoull(meta.at("model_hash").get<std::string>(), nullptr, 16);
  r.seed = meta.at("seed").get<std::uint64_t>();
  r.mode = campaign_mode_from_string(meta.at("mode").get<std::string>());
  r.lambda = vector_from_json(meta.at("lambda"), "lambda");
  r.settings = settings_from_json(meta.at("integrator"));
  r.theta = meta.at("theta").get<double>();
  if (!meta["predicted_H"].is_null()) r.predicted_H = meta["predicted_H"].get<double>();
  if (!meta["fit"].is_null()) {
    const Json& f = meta["fit"];
    KramersFit k;
    k.slope = f.at("slope");
    k.intercept = f.at("intercept");
    k.slope_se = f.at("slope_se");
    k.slope_lo = f.at("slope_lo");
    k.slope_hi = f.at("slope_hi");
    k.theta = r.theta;
    k.barrier = f.at("barrier");
    k.barrier_lo = f.at("barrier_lo");
    k.barrier_hi = f.at("barrier_hi");
    for (const auto& p : f.at("points"))
      k.points.push_back({p.at("sigma"), p.at("x"), p.at("mean_log"), p.at("se"), p.at("used"),
                          p.at("censored"), p.at("usable")});
    r.fit = k;
  } else {
    r.fit_error = meta.value("fit_error", "");
  }
  return r;
}

ExitCampaignResult read_campaign_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read '" + path + "'");
  try {
    return read_campaign(in);
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

void write_plotdata(std::ostream& os, const std::vector<PlotSeries>& series) {
  os << kPlotTag << "\n";
  for (const auto& s : series) {
    os << "# series " << s.name << "\n# columns";
    for (const auto& c : s.columns) os << " " << c;
    os << "\n";
    for (const auto& row : s.rows) {
      for (std::size_t i = 0; i < row.size(); ++i) os << (i ? " " : "") << fmt(row[i]);
      os << "\n";
    }
    os << "\n";
  }
}

RunOutcome report(const std::vector<std::string>& inputs, const std::string& out_dir, std::ostream& log,
                  double tolerance) {
  if (inputs.empty()) throw ConfigError("report", "usage: report needs at least one result file");
  std::vector<ExitCampaignResult> camps;
  std::vector<std::string> names;
  for (const auto& path : inputs) {
    camps.push_back(read_campaign_file(path));
    names.push_back(fs::path(path).parent_path().filename().string() + "/" +
                    fs::path(path).filename().string());
  }
  for (const auto& c : camps)
    if (c.model_hash != camps.front().model_hash)
      throw ConfigError("report", "model-hash mismatch: " + hex64(c.model_hash) + " vs " +
                                      hex64(camps.front().model_hash) + "; refusing to mix models");

  std::ostringstream tab;
  tab << "# sidlab-report v1\n# model " << camps.front().model << " hash " << hex64(camps.front().model_hash)
      << " tolerance " << fmt(tolerance) << "\n";
  tab << std::left << std::setw(28) << "# file" << std::setw(10) << "mode" << std::setw(12) << "H_hat"
      << std::setw(12) << "ci_lo" << std::setw(12) << "ci_hi" << std::setw(12) << "predicted" << "status\n";
  std::vector<PlotSeries> plots;
  for (std::size_t i = 0; i < camps.size(); ++i) {
    const auto& c = camps[i];
    tab << std::left << std::setw(28) << names[i] << std::setw(10) << to_string(c.mode);
    if (!c.fit) {
      tab << "no-fit (" << c.fit_error << ")\n";
      continue;
    }
    const auto& f = *c.fit;
    std::string status = "n/a";
    if (c.predicted_H) status = std::abs(f.barrier - *c.predicted_H) <= tolerance * *c.predicted_H ? "pass" : "fail";
    tab << std::setw(12) << fmt(f.barrier).substr(0, 10) << std::setw(12) << fmt(f.barrier_lo).substr(0, 10)
        << std::setw(12) << fmt(f.barrier_hi).substr(0, 10) << std::setw(12)
        << (c.predicted_H ? fmt(*c.predicted_H).substr(0, 10) : std::string("-")) << status << "\n";
    PlotSeries ps{"regression_" + std::to_string(i), {"x", "mean_log_tau", "se", "fit"}, {}};
    for (const auto& p : f.points) ps.rows.push_back({p.x, p.mean_log, p.se, f.intercept + f.slope * p.x});
    plots.push_back(std::move(ps));
  }
  for (std::size_t i = 0; i < camps.size(); ++i)
    for (std::size_t j = i + 1; j < camps.size(); ++j) {
      if (!camps[i].fit || !camps[j].fit) continue;
      const auto &a = *camps[i].fit, &b = *camps[j].fit;
      const bool overlap = a.barrier_lo <= b.barrier_hi && b.barrier_lo <= a.barrier_hi;
      const double joint = std::sqrt(std::pow(a.barrier_half_width(), 2) + std::pow(b.barrier_half_width(), 2));
      tab << "# pair " << names[i] << " " << names[j] << " diff " << fmt(a.barrier - b.barrier)
          << " joint_half_width " << fmt(joint) << " overlap " << (overlap ? 1 : 0) << "\n";
    }
  OutputSet out(out_dir);
  out.write("report.txt", tab.str());
  std::ostringstream plot;
  write_plotdata(plot, plots);
  out.write("report.plot.txt", plot.str());
  out.commit();
  log << tab.str();
  return {0, out.files()};
}

}  // namespace sidlab
