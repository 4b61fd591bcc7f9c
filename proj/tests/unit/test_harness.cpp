#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sidlab/config_io.hpp"
#include "sidlab/harness.hpp"
#include "sidlab/presets.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace sidlab;
namespace fs = std::filesystem;

namespace {
fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("sidlab-test-" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

RunRequest small_campaign(const std::string& preset_name, const fs::path& out, std::size_t workers) {
  RunRequest r;
  r.command = "campaign";
  r.preset = preset_name;
  r.overrides = {"campaign.replicas=24", "integrator.dt=0.01", "campaign.allow_coarse_dt=true",
                 "campaign.min_uncensored=5"};
  r.seed = 5;
  r.workers = workers;
  r.out_dir = out.string();
  return r;
}
}  // namespace

TEST_CASE("every preset survives a JSON round trip") {
  for (const auto& name : preset_names()) {
    auto m = preset(name).model;
    auto back = model_from_json(to_json(m));
    CAPTURE(name);
    CHECK(equivalent(m, back));
    CHECK(model_hash(m) == model_hash(back));
    CHECK(to_json(back).dump() == to_json(m).dump());
  }
}

TEST_CASE("model hash ignores sigma and name but not the dynamics") {
  auto m = preset("overdamped-quadratic-interacting").model;
  auto s = m.with_sigma(0.9);
  s.name = "other";
  CHECK(model_hash(m) == model_hash(s));
  auto k = m.with_kernel(MemoryKernel::uniform());
  CHECK(model_hash(m) != model_hash(k));
}

TEST_CASE("overrides") {
  Json j = preset_config("overdamped-quadratic");
  apply_override(j, "model.sigma=0.25");
  CHECK(j["model"]["sigma"] == 0.25);
  apply_override(j, "campaign.mode=frozen");
  CHECK(j["campaign"]["mode"] == "frozen");
  CHECK_THROWS_AS(apply_override(j, "novalue"), ConfigError);
  CHECK_THROWS_AS(apply_override(j, "=3"), ConfigError);
}

TEST_CASE("schema errors name the offending key") {
  Json j = preset_config("overdamped-quadratic");
  j["model"]["kernel"]["kind"] = "triangular";
  try {
    model_from_json(j["model"]);
    CHECK_MESSAGE(false, "expected a schema error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("model.kernel") != std::string::npos);
  }
  CHECK_THROWS_AS(preset("no-such-preset"), ConfigError);
}

TEST_CASE("campaign output does not depend on the worker count") {
  std::ostringstream log;
  std::string ref;
  for (std::size_t w : {1, 4, 16}) {
    auto out = scratch("workers-" + std::to_string(w));
    auto res = run(small_campaign("overdamped-quadratic-interacting", out, w), log);
    CHECK(res.status == 0);
    const auto text = slurp(out / "campaign.txt");
    if (ref.empty()) ref = text;
    CHECK(text == ref);
    fs::remove_all(out);
  }
}

TEST_CASE("rerun reproduces artifacts and report refuses mixed models") {
  std::ostringstream log;
  auto a = scratch("rerun-a"), b = scratch("rerun-b"), c = scratch("rerun-c"), rep = scratch("rerun-rep");
  run(small_campaign("overdamped-quadratic-interacting", a, 2), log);
  rerun((a / "manifest.json").string(), b.string(), log);
  CHECK(slurp(a / "campaign.txt") == slurp(b / "campaign.txt"));
  CHECK(slurp(a / "campaign.plot.txt") == slurp(b / "campaign.plot.txt"));

  auto res = report({(a / "campaign.txt").string(), (b / "campaign.txt").string()}, rep.string(), log);
  CHECK(res.status == 0);
  CHECK(fs::exists(rep / "report.txt"));

  run(small_campaign("overdamped-quadratic", c, 1), log);
  CHECK_THROWS_AS(report({(a / "campaign.txt").string(), (c / "campaign.txt").string()}, rep.string(), log),
                  ConfigError);
  CHECK_THROWS_AS(report({}, rep.string(), log), ConfigError);
  for (const auto& p : {a, b, c, rep}) fs::remove_all(p);
}

TEST_CASE("campaign files round trip and reject other versions") {
  ExitCampaignResult r;
  r.model = "m";
  r.model_hash = 0xabcdef0123456789ULL;
  r.seed = 3;
  r.lambda = Vector::Constant(1, 0.25);
  r.theta = 1;
  r.predicted_H = 0.5;
  SigmaSamples s;
  s.sigma = 0.7;
  s.horizon = 100;
  s.tau = {1.5, 100};
  s.censored = {0, 1};
  r.samples = {s};
  r.fit_error = "too few";
  std::stringstream ss;
  write_campaign(ss, r);
  auto back = read_campaign(ss);
  CHECK(back.model_hash == r.model_hash);
  CHECK(back.samples.size() == 1);
  CHECK(back.samples[0].tau == s.tau);
  CHECK(back.samples[0].censored == s.censored);
  CHECK(*back.predicted_H == 0.5);

  std::stringstream again;
  write_campaign(again, r);
  std::string text = again.str();
  text.replace(text.find("v1"), 2, "v9");
  std::stringstream bad(text);
  CHECK_THROWS(read_campaign(bad));
}

TEST_CASE("a failing run leaves no partial output") {
  std::ostringstream log;
  auto out = scratch("fail");
  RunRequest r;
  r.command = "campaign";
  r.preset = "overdamped-quadratic";
  r.overrides = {"campaign.replicas=-3"};
  r.out_dir = out.string();
  CHECK_THROWS_AS(run(r, log), ConfigError);
  CHECK((!fs::exists(out) || fs::is_empty(out)));
  fs::remove_all(out);
}
