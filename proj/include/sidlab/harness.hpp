#pragma once

#include "sidlab/config_io.hpp"
#include "sidlab/exits.hpp"
#include "sidlab/gronwall.hpp"
#include "sidlab/toychain.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace sidlab {

inline constexpr const char* kSidlabVersion = "0.1.0";

// format tags, first line of every artifact
inline constexpr const char* kCampaignTag = "# sidlab-campaign v1";
inline constexpr const char* kPlotTag = "# sidlab-plotdata v1";
inline constexpr const char* kManifestTag = "sidlab-manifest v1";

std::vector<std::string> subcommands();

struct RunRequest {
  std::string command;
  std::string config_path;  // JSON config, or a manifest to rerun
  std::string preset;
  std::vector<std::string> overrides;  // key.path=value
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::string out_dir = "sidlab-out";
};

struct RunOutcome {
  int status = 0;
  std::vector<std::string> files;  // written artifacts, manifest last
};

// preset expanded into a run config: model, domain, predicted_H, change_of_variable
Json preset_config(const std::string& name);

// preset (from the request or the file's "preset" key), then the file, then the overrides
Json resolve_config(const RunRequest& req);

// runs one subcommand and writes artifacts plus manifest.json into out_dir; throws on
// schema errors after removing anything it had written
RunOutcome run(const RunRequest& req, std::ostream& log);

// rerun from manifest.json into another directory
RunOutcome rerun(const std::string& manifest_path, const std::string& out_dir, std::ostream& log);

// consolidated table and plot data over result files
RunOutcome report(const std::vector<std::string>& inputs, const std::string& out_dir,
                  std::ostream& log, double tolerance = 0.15);

// campaign result files
void write_campaign(std::ostream& os, const ExitCampaignResult& r);
ExitCampaignResult read_campaign(std::istream& is);
ExitCampaignResult read_campaign_file(const std::string& path);

// plot data: named blocks of whitespace columns
struct PlotSeries {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};
void write_plotdata(std::ostream& os, const std::vector<PlotSeries>& series);

std::uint64_t fnv1a(const std::string& bytes);

}  // namespace sidlab
