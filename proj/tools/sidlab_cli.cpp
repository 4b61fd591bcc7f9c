#include "sidlab/harness.hpp"
#include "sidlab/presets.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>

namespace {

const char* describe(const std::string& name) {
  static const std::map<std::string, const char*> text = {
      {"simulate", "particle trajectories"},
      {"campaign", "exit-time campaign over a sigma grid, Kramers fit"},
      {"couple", "parallel coupling gaps and shadowing probe"},
      {"lambda", "self-consistent rest point"},
      {"quasipotential", "boundary infimum and minimum-action paths"},
      {"gronwall", "memory Gronwall envelopes and domination check"},
      {"toychain", "two-state chain occupancy and exponent spread"},
      {"check", "dissipativity probe and config sanity"},
  };
  auto it = text.find(name);
  return it == text.end() ? "" : it->second;
}

void add_run_flags(CLI::App* sub, sidlab::RunRequest& req, std::uint64_t& seed, std::size_t& workers) {
  sub->add_option("--config", req.config_path, "JSON run config or manifest");
  sub->add_option("--preset", req.preset, "built-in model preset");
  sub->add_option("--override", req.overrides, "key.path=value, repeatable");
  sub->add_option("--seed", seed, "campaign seed");
  sub->add_option("--workers", workers, "worker threads (default: SIDLAB_WORKERS or all cores)");
  sub->add_option("--out", req.out_dir, "output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sidlab: self-interacting diffusion exit-time laboratory"};
  app.require_subcommand(1);

  sidlab::RunRequest req;
  std::uint64_t seed = 0;
  std::size_t workers = 0;
  std::vector<CLI::App*> runs;
  for (const auto& name : sidlab::subcommands()) {
    auto* sub = app.add_subcommand(name, describe(name));
    add_run_flags(sub, req, seed, workers);
    runs.push_back(sub);
  }

  std::string manifest;
  std::string rerun_out = "sidlab-rerun";
  auto* rerun = app.add_subcommand("rerun", "repeat a run from its manifest");
  rerun->add_option("manifest", manifest)->required();
  rerun->add_option("--out", rerun_out);

  std::vector<std::string> inputs;
  std::string report_out = "sidlab-report";
  double tolerance = 0.15;
  auto* report = app.add_subcommand("report", "summarize campaign result files");
  report->add_option("files", inputs);
  report->add_option("--out", report_out);
  report->add_option("--tolerance", tolerance, "relative tolerance against the predicted barrier");

  auto* presets = app.add_subcommand("presets", "list built-in presets");

  CLI11_PARSE(app, argc, argv);

  try {
    if (presets->parsed()) {
      for (const auto& n : sidlab::preset_names())
        std::cout << n << "  " << sidlab::preset(n).description << "\n";
      return 0;
    }
    if (rerun->parsed()) {
      auto out = sidlab::rerun(manifest, rerun_out, std::cerr);
      for (const auto& f : out.files) std::cout << f << "\n";
      return out.status;
    }
    if (report->parsed()) {
      auto out = sidlab::report(inputs, report_out, std::cout, tolerance);
      return out.status;
    }
    for (auto* sub : runs) {
      if (!sub->parsed()) continue;
      req.command = sub->get_name();
      if (sub->count("--seed")) req.seed = seed;
      if (sub->count("--workers")) req.workers = workers;
      auto out = sidlab::run(req, std::cerr);
      for (const auto& f : out.files) std::cout << f << "\n";
      return out.status;
    }
  } catch (const sidlab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
