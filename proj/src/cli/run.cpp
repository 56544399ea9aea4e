#include "tstitch/cli/run.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>

#include "tstitch/cli/report.hpp"
#include "tstitch/dataset_io.hpp"
#include "tstitch/env/env.hpp"
#include "tstitch/errors.hpp"
#include "tstitch/io_util.hpp"
#include "tstitch/parallel.hpp"
#include "tstitch/policy/policy.hpp"

namespace ts::cli {

namespace fs = std::filesystem;

namespace {

struct Cell {
  double x = 0.0;
  std::uint64_t seed = 0;
  fs::path dir;
};

std::vector<Cell> cells(const RunConfig& cfg, const fs::path& run_dir) {
  std::vector<Cell> out;
  for (double x : cfg.data.x_percent) {
    for (auto seed : cfg.seeds) {
      out.push_back({x, seed, run_dir / ("x" + format_real(x)) / ("seed" + std::to_string(seed))});
    }
  }
  return out;
}

std::uint64_t data_seed(const Cell& c) {
  return derive_seed(c.seed, 0xda7a, static_cast<std::uint64_t>(std::llround(c.x * 1000.0)));
}
std::uint64_t stitch_seed(const Cell& c) { return derive_seed(c.seed, 0x5717); }
std::uint64_t bc_seed(const Cell& c, std::uint64_t b) { return derive_seed(c.seed, 0xbc, b); }
std::uint64_t eval_seed(const Cell& c, std::uint64_t b) { return derive_seed(c.seed, 0xe7a1, b); }

class Logger {
 public:
  explicit Logger(const RunOptions& opt) : out_(opt.quiet ? nullptr : opt.log) {}
  template <typename... Args>
  void operator()(const Args&... args) const {
    if (!out_) return;
    std::ostringstream os;
    os << "[tsctl] ";
    (os << ... << args);
    *out_ << os.str() << '\n';
  }

 private:
  std::ostream* out_;
};

void write_artifact(const fs::path& path, const std::string& header,
                    const std::function<void(std::ostream&)>& body) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << header << '\n';
  body(out);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

fs::path iter_path(const Cell& c, int k) {
  return k == 0 ? c.dir / "data.tsd" : c.dir / ("ts_iter" + std::to_string(k) + ".tsd");
}

Dataset read_dataset(const fs::path& path) {
  auto in = open_artifact(path);
  return read_binary(in);
}

policy::Policy read_policy_file(const fs::path& path) {
  auto in = open_artifact(path);
  return policy::read_policy(in);
}

env::ActionFn as_action(std::shared_ptr<const policy::Policy> p) {
  return [p](std::span<const double> s, std::mt19937_64&) { return policy::act(*p, s); };
}

env::GaussianPolicyFn as_gaussian(std::shared_ptr<const policy::Policy> p) {
  return [p](std::span<const double> s) {
    const auto g = policy::action_distribution(*p, s);
    return env::GaussianAction{g.mean, g.stddev};
  };
}

// Iterations whose datasets get a BC policy.
std::vector<int> bc_iterations(const RunConfig& cfg) {
  std::vector<int> ks;
  if (cfg.bc.every_iteration) {
    for (int k = 1; k <= cfg.stitch.iterations; ++k) ks.push_back(k);
  } else {
    ks.push_back(cfg.stitch.iterations);
  }
  return ks;
}

std::string policy_name(const std::string& stem, std::uint64_t b) {
  return stem + "_b" + std::to_string(b) + ".pol";
}

void cmd_gen(const RunConfig& cfg, const RunOptions& opt, const Logger& log) {
  const auto e = env::make_env(cfg.env.name, cfg.env.params);
  for (const auto& c : cells(cfg, opt.run_dir)) {
    const auto ds = env::generate_mixed_dataset(e, c.x, cfg.data.n_traj, cfg.data.noise_std, data_seed(c));
    write_artifact(iter_path(c, 0), artifact_header("gen", cfg, std::to_string(c.seed)),
                   [&](std::ostream& out) { write_binary(out, ds); });
    log("gen x=", format_real(c.x), " seed=", c.seed, " trajectories=", ds.trajectories.size(),
        " mean_return=", format_real(mean_return(ds)));
  }
}

void cmd_train_models(const RunConfig& cfg, const RunOptions& opt, const Logger& log) {
  for (const auto& c : cells(cfg, opt.run_dir)) {
    const auto ds = read_dataset(iter_path(c, 0));
    const auto trained = stitch::train_models(ds, cfg.models, stitch_seed(c));
    write_artifact(c.dir / "models.bin", artifact_header("train-models", cfg, std::to_string(c.seed)),
                   [&](std::ostream& out) { stitch::write_models(out, trained); });
    log("train-models x=", format_real(c.x), " seed=", c.seed, " ensemble_nll=",
        format_real(trained.forward.holdout_nll.front()));
  }
}

void cmd_stitch(const RunConfig& cfg, const RunOptions& opt, const Logger& log) {
  for (const auto& c : cells(cfg, opt.run_dir)) {
    const auto ds = read_dataset(iter_path(c, 0));
    stitch::TrainedModels trained;
    {
      auto in = open_artifact(c.dir / "models.bin");
      trained = stitch::read_models(in);
    }
    const stitch::LearnedModels lm(trained.forward, trained.inverse, trained.reward, cfg.stitch.z_mode);
    auto scfg = cfg.stitch;
    scfg.seed = stitch_seed(c);
    auto vcfg = cfg.models.value;
    vcfg.seed = derive_seed(scfg.seed, 0x54);
    stitch::StitchLog slog;
    std::vector<Dataset> stages;
    stitch::run_ts_with(ds, lm, vcfg, scfg, slog, &stages);
    const auto header = artifact_header("stitch", cfg, std::to_string(c.seed));
    for (std::size_t k = 0; k < stages.size(); ++k) {
      write_artifact(iter_path(c, static_cast<int>(k + 1)), header,
                     [&](std::ostream& out) { write_binary(out, stages[k]); });
    }
    write_artifact(c.dir / "stitch_log.jsonl", header, [&](std::ostream& out) { stitch::write_log_jsonl(out, slog); });
    for (const auto& it : slog.iterations) {
      log("stitch x=", format_real(c.x), " seed=", c.seed, " iteration=", it.iteration, " events=", it.events,
          " replaced=", it.replaced, " mean_return ", format_real(it.mean_return_before), " -> ",
          format_real(it.mean_return_after));
      if (it.negative_margin > 0 && scfg.p_tilde > 0.0) {
        log("note: ", it.negative_margin, " replacements judged against negative returns; with p_tilde > 0 "
            "the margin admits slightly lower new returns there");
      }
    }
  }
}

struct BcJob {
  fs::path out;
  fs::path data;
  std::function<policy::Policy(const Dataset&)> train;
  std::string seed;
};

void cmd_bc(const RunConfig& cfg, const RunOptions& opt, const Logger& log) {
  const auto e = env::make_env(cfg.env.name, cfg.env.params);
  std::vector<BcJob> jobs;
  for (const auto& c : cells(cfg, opt.run_dir)) {
    for (auto b : cfg.bc_seeds) {
      auto bcfg = cfg.bc.cfg;
      bcfg.seed = bc_seed(c, b);
      const auto tag = std::to_string(c.seed) + "/" + std::to_string(b);
      const auto pdir = c.dir / "policies";
      auto plain = [bcfg, bound = e.action_bound](const Dataset& d) { return policy::train_bc(d, bound, bcfg); };
      auto gauss = [bcfg, bound = e.action_bound](const Dataset& d) {
        return policy::train_gaussian_bc(d, bound, bcfg);
      };
      jobs.push_back({pdir / policy_name("bc", b), iter_path(c, 0), plain, tag});
      for (int k : bc_iterations(cfg)) {
        jobs.push_back({pdir / policy_name("tsbc_k" + std::to_string(k), b), iter_path(c, k), plain, tag});
      }
      if (cfg.bc.gaussian) {
        jobs.push_back({pdir / policy_name("gbc", b), iter_path(c, 0), gauss, tag});
        jobs.push_back({pdir / policy_name("gtsbc", b), iter_path(c, cfg.stitch.iterations), gauss, tag});
      }
      if (cfg.bc.weighted) {
        auto vcfg = cfg.models.value;
        vcfg.seed = derive_seed(stitch_seed(c), 0x77);
        auto weighted = [bcfg, vcfg, bound = e.action_bound](const Dataset& d) {
          const auto vf = models::train_value(d, vcfg);
          return policy::train_weighted_bc(d, vf, bound, bcfg);
        };
        jobs.push_back({pdir / policy_name("wbc", b), iter_path(c, 0), weighted, tag});
      }
    }
  }
  // Check inputs up front so a missing artifact fails before any training.
  for (const auto& j : jobs) {
    if (!fs::exists(j.data)) throw MissingArtifact(j.data.string());
  }
  parallel_for(jobs.size(), [&](std::size_t i) {
    const auto& j = jobs[i];
    const auto p = j.train(read_dataset(j.data));
    write_artifact(j.out, artifact_header("bc", cfg, j.seed), [&](std::ostream& out) { policy::write_policy(out, p); });
  });
  log("bc trained ", jobs.size(), " policies");
}

double env_reference(const env::EnvSpec& e) {
  return e.kind == env::EnvKind::chain ? 1.0 : env::reference_return(e);
}

void cmd_eval(const RunConfig& cfg, const RunOptions& opt, const Logger& log) {
  const auto e = env::make_env(cfg.env.name, cfg.env.params);
  const int episodes = cfg.eval.episodes;
  std::vector<MetricRow> rows;
  const double random_ret = env::evaluate_policy(e, env::uniform_random_policy(e), std::max(episodes, 40), 0xe0).mean;
  rows.push_back({"reference_return", "env", 0, 0.0, env_reference(e)});
  rows.push_back({"random_return", "env", 0, 0.0, random_ret});
  rows.push_back({"expert_return", "env", 0, 0.0, env::evaluate_policy(e, env::expert_policy(e), episodes, 0xe0).mean});

  const auto cs = cells(cfg, opt.run_dir);
  const int K = cfg.stitch.iterations;
  // Jobs write only their own slot; rows are assembled in a fixed order afterwards.
  std::vector<std::vector<MetricRow>> per_cell(cs.size());
  for (const auto& c : cs) {
    for (int k = 0; k <= K; ++k) {
      if (!fs::exists(iter_path(c, k))) throw MissingArtifact(iter_path(c, k).string());
    }
    if (!fs::exists(c.dir / "policies" / policy_name("bc", cfg.bc_seeds.front()))) {
      throw MissingArtifact((c.dir / "policies" / policy_name("bc", cfg.bc_seeds.front())).string());
    }
  }
  parallel_for(cs.size(), [&](std::size_t ci) {
    const auto& c = cs[ci];
    auto& out = per_cell[ci];
    const auto seed = std::to_string(c.seed);
    for (int k = 0; k <= K; ++k) out.push_back({"dataset_return", seed, k, c.x, mean_return(read_dataset(iter_path(c, k)))});
    {
      auto in = open_artifact(c.dir / "stitch_log.jsonl");
      const auto slog = stitch::read_log_jsonl(in);
      for (const auto& it : slog.iterations) {
        out.push_back({"replaced", seed, it.iteration, c.x, static_cast<double>(it.replaced)});
        out.push_back({"stitch_events", seed, it.iteration, c.x, static_cast<double>(it.events)});
      }
    }
    const auto pdir = c.dir / "policies";
    for (auto b : cfg.bc_seeds) {
      const auto tag = seed + "/" + std::to_string(b);
      const auto es = eval_seed(c, b);
      auto ret = [&](const fs::path& p) {
        return env::evaluate_policy(e, as_action(std::make_shared<const policy::Policy>(read_policy_file(p))), episodes, es).mean;
      };
      out.push_back({"bc_return", tag, 0, c.x, ret(pdir / policy_name("bc", b))});
      for (int k : bc_iterations(cfg)) {
        out.push_back({"tsbc_return", tag, k, c.x, ret(pdir / policy_name("tsbc_k" + std::to_string(k), b))});
      }
      if (cfg.bc.weighted) out.push_back({"wbc_return", tag, 0, c.x, ret(pdir / policy_name("wbc", b))});
      if (cfg.eval.mse_rollouts > 0) {
        auto mse = [&](const fs::path& p) {
          return env::action_mse(e, env::expert_policy(e), as_action(std::make_shared<const policy::Policy>(read_policy_file(p))),
                                 cfg.eval.mse_rollouts, es);
        };
        out.push_back({"action_mse_bc", tag, 0, c.x, mse(pdir / policy_name("bc", b))});
        out.push_back({"action_mse_tsbc", tag, K, c.x, mse(pdir / policy_name("tsbc_k" + std::to_string(K), b))});
      }
      if (cfg.bc.gaussian && cfg.eval.kl_rollouts > 0) {
        const auto expert = env::expert_gaussian(e, cfg.eval.kl_stddev);
        auto kl = [&](const fs::path& p) {
          return env::kl_to_expert(e, expert, as_gaussian(std::make_shared<const policy::Policy>(read_policy_file(p))),
                                   cfg.eval.kl_rollouts, es).value;
        };
        out.push_back({"kl_bc", tag, 0, c.x, kl(pdir / policy_name("gbc", b))});
        out.push_back({"kl_tsbc", tag, K, c.x, kl(pdir / policy_name("gtsbc", b))});
      }
    }
  });
  for (auto& block : per_cell) rows.insert(rows.end(), block.begin(), block.end());

  const fs::path path = opt.run_dir / "metrics.csv";
  fs::create_directories(opt.run_dir);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_metrics(out, rows, {artifact_header("eval", cfg, "all").substr(2)});
  log("eval wrote ", rows.size(), " metric rows to ", path.string());
}

void cmd_report(const RunConfig& cfg, const RunOptions& opt, const Logger& log) {
  auto in = open_artifact(opt.run_dir / "metrics.csv");
  const auto rows = read_metrics(in);
  emit_report(opt.run_dir / "report", rows, {artifact_header("report", cfg, "all").substr(2)});
  for (const auto& p : iteration_curve(rows)) {
    log("report x=", format_real(p.x_percent), " iteration=", p.iteration, " mean_return=", format_real(p.mean),
        " n=", p.n);
  }
}

}  // namespace

std::string artifact_header(std::string_view command, const RunConfig& cfg, std::string_view seed) {
  return "# tsctl command=" + std::string(command) + " config_hash=" + config_hash(cfg) + " seed=" + std::string(seed);
}

std::ifstream open_artifact(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact(path.string());
  std::string first;
  std::getline(in, first);
  if (first.rfind("# tsctl ", 0) != 0) throw ParseError("artifact without tsctl header: " + path.string(), 1);
  return in;
}

void run_command(std::string_view command, const RunConfig& cfg, const RunOptions& opt) {
  if (std::find(std::begin(kCommands), std::end(kCommands), command) == std::end(kCommands)) {
    throw std::invalid_argument("unknown command '" + std::string(command) + "'");
  }
  if (command != "report") require_blocks(cfg, command);
  const Logger log(opt);
  if (command == "gen") cmd_gen(cfg, opt, log);
  else if (command == "train-models") cmd_train_models(cfg, opt, log);
  else if (command == "stitch") cmd_stitch(cfg, opt, log);
  else if (command == "bc") cmd_bc(cfg, opt, log);
  else if (command == "eval") cmd_eval(cfg, opt, log);
  else if (command == "report") cmd_report(cfg, opt, log);
  else {
    for (auto step : {"gen", "train-models", "stitch", "bc", "eval", "report"}) run_command(step, cfg, opt);
  }
}

}  // namespace ts::cli
