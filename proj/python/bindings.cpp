#include "sidlab/config_io.hpp"
#include "sidlab/engine.hpp"
#include "sidlab/exits.hpp"
#include "sidlab/fixedpoint.hpp"
#include "sidlab/gronwall.hpp"
#include "sidlab/harness.hpp"
#include "sidlab/measure.hpp"
#include "sidlab/presets.hpp"
#include "sidlab/quasipotential.hpp"
#include "sidlab/toychain.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace sidlab;

namespace {

// configs cross the boundary as JSON text; the python layer converts dicts
ModelConfig model_of(const std::string& text) { return model_from_json(Json::parse(text)); }

MemoryKernel kernel_of(const std::string& kind, double rate) {
  switch (kernel_kind_from_string(kind)) {
    case KernelKind::dirac: return MemoryKernel::dirac();
    case KernelKind::uniform: return MemoryKernel::uniform();
    case KernelKind::exponential: return MemoryKernel::exponential(rate);
  }
  return MemoryKernel::dirac();
}

py::dict fit_dict(const KramersFit& f) {
  py::dict d;
  d["slope"] = f.slope;
  d["intercept"] = f.intercept;
  d["barrier"] = f.barrier;
  d["barrier_lo"] = f.barrier_lo;
  d["barrier_hi"] = f.barrier_hi;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.attr("__version__") = kSidlabVersion;

  // translators run newest first, so the base class goes in before its subclasses
  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<InsufficientDataError>(m, "InsufficientDataError", base.ptr());

  m.def("preset_names", &preset_names);
  m.def("preset_config", [](const std::string& name) { return preset_config(name).dump(); });
  m.def("model_hash", [](const std::string& model) { return hex64(model_hash(model_of(model))); });

  m.def(
      "find_lambda",
      [](const std::string& model, double tol, std::optional<Vector> start) {
        FixedPointOptions o;
        o.tol = tol;
        o.start = start;
        auto r = find_lambda(model_of(model), o);
        py::dict d;
        d["lambda"] = r.lambda;
        d["residual"] = r.residual;
        d["iterations"] = r.iterations;
        d["converged"] = r.converged;
        d["contraction_ratio"] = r.contraction_ratio();
        return d;
      },
      py::arg("model"), py::arg("tol") = 1e-12, py::arg("start") = py::none());

  m.def(
      "simulate",
      [](const std::string& model, double dt, double horizon, std::size_t particles, std::uint64_t seed,
         std::size_t record_stride) {
        IntegratorSettings st;
        st.dt = dt;
        st.horizon = horizon;
        st.particles = particles;
        st.seed = seed;
        st.record_stride = record_stride;
        SimulationResult r;
        {
          py::gil_scoped_release release;
          r = simulate_particles(model_of(model), st);
        }
        return py::make_tuple(r.batch.times, r.batch.states);
      },
      py::arg("model"), py::arg("dt") = 1e-3, py::arg("horizon") = 1.0, py::arg("particles") = 256,
      py::arg("seed") = 0, py::arg("record_stride") = 0);

  m.def(
      "campaign",
      [](const std::string& model, const std::string& domain, const std::vector<double>& sigma,
         std::size_t replicas, const std::string& mode, double dt, std::size_t particles, std::uint64_t seed,
         std::optional<double> predicted_H, std::size_t workers, bool allow_coarse_dt) {
        CampaignOptions o;
        o.sigma = sigma;
        o.replicas = replicas;
        o.mode = campaign_mode_from_string(mode);
        o.settings.dt = dt;
        o.settings.particles = particles;
        o.settings.seed = seed;
        o.predicted_H = predicted_H;
        o.workers = workers;
        o.allow_coarse_dt = allow_coarse_dt;
        const ModelConfig c = model_of(model);
        const Domain dom = domain_from_json(Json::parse(domain));
        ExitCampaignResult r;
        {
          py::gil_scoped_release release;
          r = run_campaign(c, dom, o);
        }
        py::dict d;
        py::list samples;
        for (const auto& s : r.samples) {
          py::dict e;
          e["sigma"] = s.sigma;
          e["horizon"] = s.horizon;
          e["tau"] = s.tau;
          std::vector<bool> cens(s.censored.begin(), s.censored.end());
          e["censored"] = cens;
          samples.append(e);
        }
        d["samples"] = samples;
        d["lambda"] = r.lambda;
        d["model_hash"] = hex64(r.model_hash);
        d["fit"] = r.fit ? py::object(fit_dict(*r.fit)) : py::object(py::none());
        d["fit_error"] = r.fit_error;
        return d;
      },
      py::arg("model"), py::arg("domain"), py::arg("sigma"), py::arg("replicas") = 300,
      py::arg("mode") = "tagged", py::arg("dt") = 1e-3, py::arg("particles") = 256, py::arg("seed") = 0,
      py::arg("predicted_H") = py::none(), py::arg("workers") = 0, py::arg("allow_coarse_dt") = false);

  m.def(
      "w2",
      [](const Cloud& a, const Cloud& b, const std::string& method) {
        EmpiricalMeasure mu(a), nu(b);
        if (method == "exact") return w2_exact_small(mu, nu);
        if (method == "1d") return w2_1d(mu, nu);
        if (method == "matched") return w2_matched(mu, nu);
        throw ConfigError("method", "expected exact, 1d or matched");
      },
      py::arg("a"), py::arg("b"), py::arg("method") = "exact");

  m.def(
      "elliptic_H",
      [](const std::string& model, const Vector& lambda, const std::string& domain) {
        return elliptic_H(model_of(model), lambda, domain_from_json(Json::parse(domain)));
      },
      py::arg("model"), py::arg("lambda_"), py::arg("domain"));

  m.def(
      "minimize_action",
      [](const std::string& model, const Vector& lambda, const Vector& target, std::size_t nodes,
         std::size_t T_points) {
        ActionOptions o;
        o.nodes = nodes;
        o.T_points = T_points;
        const ModelConfig c = model_of(model);
        ActionResult r;
        {
          py::gil_scoped_release release;
          r = minimize_action(c, lambda, target, o);
        }
        py::dict d;
        d["value"] = r.value;
        d["T"] = r.T;
        d["converged"] = r.converged;
        d["times"] = r.path.times;
        d["path"] = r.path.states;
        return d;
      },
      py::arg("model"), py::arg("lambda_"), py::arg("target"), py::arg("nodes") = 200, py::arg("T_points") = 8);

  m.def(
      "gronwall_extremal",
      [](double alpha, double beta, double gamma, const std::string& kernel, double rate, double f0, double T,
         double dt) {
        auto s = integrate_extremal(alpha, beta, gamma, kernel_of(kernel, rate), f0, T, dt);
        return py::make_tuple(s.times, s.values);
      },
      py::arg("alpha"), py::arg("beta"), py::arg("gamma"), py::arg("kernel") = "dirac", py::arg("rate") = 1.0,
      py::arg("f0") = 1.0, py::arg("T") = 10.0, py::arg("dt") = 1e-3);

  m.def(
      "toychain_spread",
      [](double a, double alpha, const std::vector<double>& sigma2, std::size_t n,
         const std::vector<double>& centers, double delta, std::uint64_t seed) {
        ChainParams p;
        p.a01 = p.a10 = a;
        p.alpha = alpha;
        std::vector<double> s;
        for (double v : sigma2) s.push_back(std::sqrt(v));
        auto t = exponent_spread(p, s, n, centers, delta, seed);
        py::dict d;
        d["mass"] = t.mass;
        d["outside"] = t.outside;
        d["exponents"] = t.exponents;
        return d;
      },
      py::arg("a"), py::arg("alpha"), py::arg("sigma2"), py::arg("n") = 10000,
      py::arg("centers") = std::vector<double>{}, py::arg("delta") = 0.1, py::arg("seed") = 0);

  m.def(
      "run",
      [](const std::string& command, const std::string& preset, const std::vector<std::string>& overrides,
         std::optional<std::uint64_t> seed, std::optional<std::size_t> workers, const std::string& out_dir,
         const std::string& config_path) {
        RunRequest r;
        r.command = command;
        r.preset = preset;
        r.overrides = overrides;
        r.seed = seed;
        r.workers = workers;
        r.out_dir = out_dir;
        r.config_path = config_path;
        std::ostringstream log;
        RunOutcome out;
        {
          py::gil_scoped_release release;
          out = run(r, log);
        }
        return py::make_tuple(out.files, log.str());
      },
      py::arg("command"), py::arg("preset") = "", py::arg("overrides") = std::vector<std::string>{},
      py::arg("seed") = py::none(), py::arg("workers") = py::none(), py::arg("out_dir") = "sidlab-out",
      py::arg("config_path") = "");
}
