#pragma once

#include <filesystem>
#include <iosfwd>
#include <string_view>

#include "tstitch/cli/config.hpp"

namespace ts::cli {

inline constexpr std::string_view kCommands[] = {"gen", "train-models", "stitch", "bc", "eval", "report", "pipeline"};

struct RunOptions {
  std::filesystem::path run_dir;
  bool quiet = false;
  std::ostream* log = nullptr;  // progress lines; silent when null or quiet
};

/// Executes one command against the run directory:
///   gen           x<X>/seed<S>/data.tsd
///   train-models  x<X>/seed<S>/models.bin
///   stitch        x<X>/seed<S>/ts_iter<k>.tsd, stitch_log.jsonl
///   bc            x<X>/seed<S>/policies/*.pol
///   eval          metrics.csv
///   report        report/{report.csv, summary.csv, iterations.svg, returns_by_x.svg}
///   pipeline      all of the above in order
/// Every artifact starts with a `# tsctl command=... config_hash=... seed=...` line.
/// Throws ConfigError, MissingArtifact, or std::invalid_argument for an unknown command.
void run_command(std::string_view command, const RunConfig& cfg, const RunOptions& opt);

/// First line of every artifact written for `command`.
std::string artifact_header(std::string_view command, const RunConfig& cfg, std::string_view seed);

/// Opens an artifact and skips its header line; MissingArtifact when absent.
std::ifstream open_artifact(const std::filesystem::path& path);

}  // namespace ts::cli
