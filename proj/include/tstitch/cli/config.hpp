#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tstitch/policy/policy.hpp"
#include "tstitch/stitch/stitching.hpp"

namespace ts::cli {

struct EnvBlock {
  std::string name = "pointmass";
  std::map<std::string, double> params;  // make_env overrides
};

struct DataBlock {
  std::vector<double> x_percent{10.0};
  std::size_t n_traj = 100;
  double noise_std = 1.5;
};

struct BcBlock {
  policy::BcConfig cfg;
  bool weighted = false;         // also train value-weighted BC on the original data
  bool every_iteration = false;  // BC on the dataset after every TS iteration, not just the last
  bool gaussian = false;         // Gaussian-head BC pairs for the KL metrics
};

struct EvalBlock {
  int episodes = 10;
  int kl_rollouts = 0;  // 0 disables the KL metrics
  double kl_stddev = 0.01;
  int mse_rollouts = 0;  // 0 disables the action-MSE metrics
};

/// Which blocks the document actually contained.
struct BlocksPresent {
  bool env = false, data = false, models = false, stitch = false, bc = false, eval = false;
};

struct RunConfig {
  EnvBlock env;
  DataBlock data;
  stitch::ModelConfigs models;
  stitch::StitchConfig stitch;
  BcBlock bc;
  EvalBlock eval;
  std::vector<std::uint64_t> seeds{0};     // one full replicate (data, models, TS) per seed
  std::vector<std::uint64_t> bc_seeds{0};  // BC seeds per replicate
  std::string out = "runs/default";
  BlocksPresent present;
  std::string canonical;  // canonical JSON of the effective document, hashed into artifacts
};

/// Parses a JSON run configuration. Unknown keys and wrong types raise ConfigError with the
/// dotted key path; malformed JSON raises ParseError with a line number.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::string& path);

/// Replaces `seeds` with a single seed and refreshes the canonical form.
void override_seed(RunConfig& cfg, std::uint64_t seed);

/// ConfigError unless every block `command` reads was given explicitly.
void require_blocks(const RunConfig& cfg, std::string_view command);

/// FNV-1a of the canonical form, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

}  // namespace ts::cli
