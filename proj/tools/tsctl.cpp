// tsctl: config-driven trajectory stitching pipeline.
#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "tstitch/cli/config.hpp"
#include "tstitch/cli/run.hpp"
#include "tstitch/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Trajectory stitching pipeline driver"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
  app.add_option("--config", config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "run directory (overrides the config's out)");
  app.add_option("--seed", seed, "single replicate seed (overrides the config's seeds)");
  app.add_flag("--quiet", quiet, "suppress progress output");
  app.fallthrough();
  for (auto name : ts::cli::kCommands) app.add_subcommand(std::string(name));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    auto cfg = ts::cli::load_config(config_path);
    if (seed) ts::cli::override_seed(cfg, *seed);
    ts::cli::RunOptions opt;
    opt.run_dir = out_dir.empty() ? cfg.out : out_dir;
    opt.quiet = quiet;
    opt.log = &std::cerr;
    ts::cli::run_command(command, cfg, opt);
  } catch (const ts::ConfigError& e) {
    std::cerr << "tsctl: invalid config: " << e.what() << '\n';
    return 2;
  } catch (const ts::MissingArtifact& e) {
    std::cerr << "tsctl: " << e.what() << " (run the earlier pipeline step first)\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "tsctl: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
