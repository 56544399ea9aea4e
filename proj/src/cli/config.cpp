#include "tstitch/cli/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tstitch/env/env.hpp"
#include "tstitch/errors.hpp"
#include "tstitch/io_util.hpp"

namespace ts::cli {

using nlohmann::json;

namespace {

std::string join(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}

void check_keys(const json& obj, const std::string& path, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
  const std::set<std::string_view> ok(allowed);
  for (const auto& [key, _] : obj.items()) {
    if (!ok.contains(key)) throw ConfigError(join(path, key), "unknown key");
  }
}

double number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(path, "expected a number");
  return v.get<double>();
}

long long integer(const json& v, const std::string& path, long long lo = 0) {
  if (!v.is_number_integer()) throw ConfigError(path, "expected an integer");
  const auto x = v.get<long long>();
  if (x < lo) throw ConfigError(path, "must be >= " + std::to_string(lo));
  return x;
}

bool boolean(const json& v, const std::string& path) {
  if (!v.is_boolean()) throw ConfigError(path, "expected true or false");
  return v.get<bool>();
}

std::string text(const json& v, const std::string& path) {
  if (!v.is_string()) throw ConfigError(path, "expected a string");
  return v.get<std::string>();
}

std::vector<int> widths(const json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError(path, "expected an array of layer widths");
  std::vector<int> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(static_cast<int>(integer(v[i], path + "[" + std::to_string(i) + "]", 1)));
  }
  return out;
}

std::vector<std::uint64_t> seed_list(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) throw ConfigError(path, "expected a non-empty array of seeds");
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(static_cast<std::uint64_t>(integer(v[i], path + "[" + std::to_string(i) + "]")));
  }
  return out;
}

// Fields shared by every trainable block.
template <typename Cfg>
bool common_field(Cfg& c, const std::string& key, const json& v, const std::string& path) {
  if (key == "hidden") c.hidden = widths(v, path);
  else if (key == "epochs") c.epochs = static_cast<int>(integer(v, path));
  else if (key == "batch") c.batch = static_cast<int>(integer(v, path, 1));
  else if (key == "lr") c.adam.lr = number(v, path);
  else if (key == "l2") c.adam.l2 = number(v, path);
  else return false;
  return true;
}

void parse_forward(const json& j, const std::string& path, models::ForwardEnsembleConfig& c) {
  check_keys(j, path, {"hidden", "epochs", "batch", "lr", "l2", "members", "keep", "holdout"});
  for (const auto& [k, v] : j.items()) {
    const auto p = join(path, k);
    if (common_field(c, k, v, p)) continue;
    if (k == "members") c.members = static_cast<int>(integer(v, p, 1));
    else if (k == "keep") c.keep = static_cast<int>(integer(v, p, 1));
    else if (k == "holdout") c.holdout = number(v, p);
  }
  if (c.keep > c.members) throw ConfigError(join(path, "keep"), "cannot exceed members");
}

void parse_inverse(const json& j, const std::string& path, models::CvaeConfig& c) {
  check_keys(j, path, {"hidden", "epochs", "batch", "lr", "l2", "beta"});
  for (const auto& [k, v] : j.items()) {
    const auto p = join(path, k);
    if (common_field(c, k, v, p)) continue;
    if (k == "beta") c.beta = number(v, p);
  }
}

void parse_reward(const json& j, const std::string& path, models::RewardConfig& c) {
  check_keys(j, path, {"hidden", "epochs", "batch", "lr", "l2", "kind", "z_dim", "n_critic", "clip", "beta"});
  for (const auto& [k, v] : j.items()) {
    const auto p = join(path, k);
    if (common_field(c, k, v, p)) continue;
    if (k == "kind") {
      try {
        c.kind = models::reward_kind_from_string(text(v, p));
      } catch (const std::invalid_argument&) {
        throw ConfigError(p, "expected one of wgan, mlp, gaussian, vae");
      }
    } else if (k == "z_dim") c.z_dim = static_cast<int>(integer(v, p, 1));
    else if (k == "n_critic") c.n_critic = static_cast<int>(integer(v, p, 1));
    else if (k == "clip") c.clip = number(v, p);
    else if (k == "beta") c.beta = number(v, p);
  }
}

void parse_value(const json& j, const std::string& path, models::ValueConfig& c) {
  check_keys(j, path, {"hidden", "epochs", "batch", "lr", "l2", "gamma", "target_refresh"});
  for (const auto& [k, v] : j.items()) {
    const auto p = join(path, k);
    if (common_field(c, k, v, p)) continue;
    if (k == "gamma") c.gamma = number(v, p);
    else if (k == "target_refresh") c.target_refresh = static_cast<int>(integer(v, p, 1));
  }
}

void parse_models(const json& j, stitch::ModelConfigs& m) {
  check_keys(j, "models", {"forward", "inverse", "reward", "value"});
  if (j.contains("forward")) parse_forward(j["forward"], "models.forward", m.forward);
  if (j.contains("inverse")) parse_inverse(j["inverse"], "models.inverse", m.inverse);
  if (j.contains("reward")) parse_reward(j["reward"], "models.reward", m.reward);
  if (j.contains("value")) parse_value(j["value"], "models.value", m.value);
}

void parse_stitch(const json& j, stitch::StitchConfig& s) {
  check_keys(j, "stitch", {"epsilon", "p_tilde", "iterations", "max_len", "max_changes", "z_mode", "candidate_cap"});
  for (const auto& [k, v] : j.items()) {
    const auto p = join("stitch", k);
    if (k == "epsilon") s.epsilon = number(v, p);
    else if (k == "p_tilde") s.p_tilde = number(v, p);
    else if (k == "iterations") s.iterations = static_cast<int>(integer(v, p, 1));
    else if (k == "max_len") s.max_len = static_cast<std::size_t>(integer(v, p));
    else if (k == "max_changes") {
      if (v.is_null()) s.max_changes.reset();
      else s.max_changes = static_cast<int>(integer(v, p));
    } else if (k == "z_mode") {
      const auto m = text(v, p);
      if (m == "prior_mean") s.z_mode = models::ZMode::prior_mean;
      else if (m == "sample") s.z_mode = models::ZMode::sample;
      else throw ConfigError(p, "expected prior_mean or sample");
    } else if (k == "candidate_cap") s.candidate_cap = static_cast<std::size_t>(integer(v, p, 1));
  }
  if (s.epsilon < 0.0) throw ConfigError("stitch.epsilon", "must be >= 0");
}

void parse_bc(const json& j, BcBlock& b) {
  check_keys(j, "bc", {"hidden", "epochs", "batch", "lr", "l2", "holdout", "weighted", "every_iteration", "gaussian"});
  for (const auto& [k, v] : j.items()) {
    const auto p = join("bc", k);
    if (common_field(b.cfg, k, v, p)) continue;
    if (k == "holdout") b.cfg.holdout = number(v, p);
    else if (k == "weighted") b.weighted = boolean(v, p);
    else if (k == "every_iteration") b.every_iteration = boolean(v, p);
    else if (k == "gaussian") b.gaussian = boolean(v, p);
  }
}

void parse_eval(const json& j, EvalBlock& e) {
  check_keys(j, "eval", {"episodes", "kl_rollouts", "kl_stddev", "mse_rollouts"});
  for (const auto& [k, v] : j.items()) {
    const auto p = join("eval", k);
    if (k == "episodes") e.episodes = static_cast<int>(integer(v, p, 1));
    else if (k == "kl_rollouts") e.kl_rollouts = static_cast<int>(integer(v, p));
    else if (k == "kl_stddev") e.kl_stddev = number(v, p);
    else if (k == "mse_rollouts") e.mse_rollouts = static_cast<int>(integer(v, p));
  }
}

std::size_t line_of(std::string_view textv, std::size_t byte) {
  std::size_t line = 1;
  for (std::size_t i = 0; i < std::min(byte, textv.size()); ++i) line += textv[i] == '\n';
  return line;
}

void refresh_canonical(RunConfig& cfg, json doc) {
  doc["seeds"] = cfg.seeds;
  cfg.canonical = doc.dump();
}

}  // namespace

RunConfig parse_config(std::string_view source) {
  json doc;
  try {
    doc = json::parse(source);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config: ") + e.what(), line_of(source, e.byte ? e.byte - 1 : 0));
  }
  check_keys(doc, "", {"env", "data", "models", "stitch", "bc", "eval", "seeds", "bc_seeds", "out"});

  RunConfig cfg;
  if (doc.contains("env")) {
    cfg.present.env = true;
    const auto& e = doc["env"];
    check_keys(e, "env", {"name", "params"});
    if (e.contains("name")) cfg.env.name = text(e["name"], "env.name");
    if (e.contains("params")) {
      if (!e["params"].is_object()) throw ConfigError("env.params", "expected an object");
      for (const auto& [k, v] : e["params"].items()) cfg.env.params[k] = number(v, "env.params." + k);
    }
    try {
      cfg.models.action_bound = env::make_env(cfg.env.name, cfg.env.params).action_bound;
    } catch (const std::invalid_argument& ex) {
      throw ConfigError("env", ex.what());
    }
  }
  if (doc.contains("data")) {
    cfg.present.data = true;
    const auto& d = doc["data"];
    check_keys(d, "data", {"x_percent", "n_traj", "noise_std"});
    if (d.contains("x_percent")) {
      const auto& xs = d["x_percent"];
      if (!xs.is_array() || xs.empty()) throw ConfigError("data.x_percent", "expected a non-empty array");
      cfg.data.x_percent.clear();
      for (std::size_t i = 0; i < xs.size(); ++i) {
        const auto p = "data.x_percent[" + std::to_string(i) + "]";
        const double x = number(xs[i], p);
        if (x < 0.0 || x > 100.0) throw ConfigError(p, "must be within [0, 100]");
        cfg.data.x_percent.push_back(x);
      }
    }
    if (d.contains("n_traj")) cfg.data.n_traj = static_cast<std::size_t>(integer(d["n_traj"], "data.n_traj", 1));
    if (d.contains("noise_std")) cfg.data.noise_std = number(d["noise_std"], "data.noise_std");
  }
  if (doc.contains("models")) {
    cfg.present.models = true;
    parse_models(doc["models"], cfg.models);
  }
  if (doc.contains("stitch")) {
    cfg.present.stitch = true;
    parse_stitch(doc["stitch"], cfg.stitch);
  }
  if (doc.contains("bc")) {
    cfg.present.bc = true;
    parse_bc(doc["bc"], cfg.bc);
  }
  if (doc.contains("eval")) {
    cfg.present.eval = true;
    parse_eval(doc["eval"], cfg.eval);
  }
  if (doc.contains("seeds")) cfg.seeds = seed_list(doc["seeds"], "seeds");
  if (doc.contains("bc_seeds")) cfg.bc_seeds = seed_list(doc["bc_seeds"], "bc_seeds");
  if (doc.contains("out")) cfg.out = text(doc["out"], "out");
  refresh_canonical(cfg, doc);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifact(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void override_seed(RunConfig& cfg, std::uint64_t seed) {
  cfg.seeds = {seed};
  refresh_canonical(cfg, json::parse(cfg.canonical));
}

void require_blocks(const RunConfig& cfg, std::string_view command) {
  const auto& p = cfg.present;
  auto need = [&](bool have, const char* block) {
    if (!have) throw ConfigError(block, "block required by '" + std::string(command) + "'");
  };
  const bool all = command == "pipeline";
  need(p.env, "env");
  if (all || command == "gen") need(p.data, "data");
  if (all || command == "train-models" || command == "stitch") need(p.models, "models");
  if (all || command == "stitch") need(p.stitch, "stitch");
  if (all || command == "bc") need(p.bc, "bc");
  if (all || command == "eval") need(p.eval, "eval");
}

std::string config_hash(const RunConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(cfg.canonical)));
  return buf;
}

}  // namespace ts::cli
