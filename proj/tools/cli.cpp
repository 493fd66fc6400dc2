#include "cli.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "atpg/checkpoint.hpp"
#include "atpg/config.hpp"
#include "atpg/gradcheck.hpp"
#include "atpg/trace_io.hpp"
#include "atpg/trainer.hpp"

namespace atpg::cli {
namespace {

namespace fs = std::filesystem;
using trace_io::formatDouble;

int defaultJobs() {
  if (const char* env = std::getenv("ATPG_JOBS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (const std::exception&) {
    }
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

struct ConfigFlags {
  std::string path;
  std::vector<std::string> sets;

  void attach(CLI::App* app, bool required) {
    auto* opt = app->add_option("--config", path, "INI configuration file");
    if (required) opt->required();
    app->add_option("--set", sets, "Override one key, section.key=value (repeatable)");
  }

  RunConfig load(const std::vector<std::pair<std::string, std::string>>& named) const {
    std::vector<std::pair<std::string, std::string>> overrides;
    for (const auto& s : sets) overrides.push_back(parseOverride(s));
    overrides.insert(overrides.end(), named.begin(), named.end());
    if (path.empty()) return parseConfig("", overrides);
    return loadConfig(path, overrides);
  }
};

void echoConfig(const fs::path& dir, const RunConfig& cfg) {
  fs::create_directories(dir);
  std::ofstream out(dir / "effective.cfg");
  out << cfg.toIni();
}

void writeJson(const fs::path& path, const nlohmann::json& doc) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << doc.dump(1) << '\n';
}

std::string meanStd(double mean, double sd) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << mean << " ± " << sd;
  return os.str();
}

// ---- train ----

struct TrainArgs {
  ConfigFlags config;
  std::string out_dir;
  std::uint64_t seed = 0;
  int epochs = -1;
  int episodes_per_batch = -1;
  double learning_rate = -1.0;
  int jobs = 0;
  bool quiet = false;
};

int cmdTrain(const TrainArgs& a, std::ostream& out, std::ostream& err, bool seed_given) {
  std::vector<std::pair<std::string, std::string>> named;
  if (seed_given) named.emplace_back("trainer.seed", std::to_string(a.seed));
  if (a.epochs >= 0) named.emplace_back("trainer.epochs", std::to_string(a.epochs));
  if (a.episodes_per_batch >= 0) named.emplace_back("trainer.episodes_per_batch", std::to_string(a.episodes_per_batch));
  if (a.learning_rate >= 0.0) named.emplace_back("trainer.learning_rate", formatDouble(a.learning_rate));
  RunConfig cfg = a.config.load(named);

  const fs::path dir = a.out_dir;
  echoConfig(dir, cfg);
  cfg.trainer.checkpoint_dir = dir / "checkpoints";
  cfg.trainer.jobs = a.jobs > 0 ? a.jobs : defaultJobs();

  std::ofstream log_file(dir / "train_log.csv");
  TrainLog header_only;
  header_only.writeCsv(log_file);
  const PolicyParams initial = cfg.initialParams();
  TrainResult result;
  try {
    result = train(cfg.trainer, cfg.env, initial, cfg.bounds, [&](const EpochRecord& r) {
      TrainLog one{{r}};
      std::ostringstream row;
      one.writeCsv(row);
      const std::string text = row.str();
      log_file << text.substr(text.find('\n') + 1) << std::flush;
      if (!a.quiet)
        out << "epoch " << r.epoch << "  train " << meanStd(r.reward_train_mean, r.reward_train_std) << "  |g| "
            << std::setprecision(4) << r.grad_norm << "  " << std::setprecision(3) << r.seconds << " s"
            << (std::isnan(r.reward_eval_mean) ? std::string() : "  eval " + meanStd(r.reward_eval_mean, r.reward_eval_std))
            << '\n';
    });
  } catch (const NonFiniteGradient& e) {
    err << "error: " << e.what() << '\n';
    writeJson(dir / "nonfinite_episode.json", {{"epoch", e.epoch},
                                                {"episode", e.episode},
                                                {"scenario_seed", e.scenario_seed},
                                                {"n_targets", e.n_targets},
                                                {"motion", toString(cfg.trainer.motion)}});
    return kNonFiniteGradient;
  }
  checkpoint::save(dir / "final.atpg", Checkpoint{result.params, cfg.bounds, cfg.trainer.seed, cfg.trainer.epochs});
  out << "wrote " << (dir / "final.atpg").string() << '\n';
  return kOk;
}

// ---- eval ----

struct EvalArgs {
  ConfigFlags config;
  std::string checkpoint;
  std::vector<int> targets{3, 5, 7};
  int episodes = 30;
  std::vector<std::string> motions{"biased", "unbiased"};
  std::vector<std::uint64_t> seeds{0, 10, 100};
  std::string out_path = "eval.json";
  int jobs = 0;
};

int cmdEval(const EvalArgs& a, std::ostream& out) {
  const RunConfig cfg = a.config.load({});
  const Checkpoint ck = checkpoint::load(a.checkpoint);
  std::vector<Motion> motions;
  for (const auto& m : a.motions) motions.push_back(parseMotion(m));
  for (int n : a.targets)
    if (n < 1 || n > ck.params.layout.max_targets)
      throw ConfigError("eval: --targets " + std::to_string(n) + " outside [1, " +
                        std::to_string(ck.params.layout.max_targets) + "]");
  if (a.episodes < 1) throw ConfigError("eval: --episodes must be >= 1");
  const int jobs = a.jobs > 0 ? a.jobs : defaultJobs();

  nlohmann::json cells = nlohmann::json::array();
  std::vector<std::vector<EvalSummary>> grid;
  for (Motion m : motions) {
    grid.emplace_back();
    for (int n : a.targets) {
      EvalSummary s = evaluate(ck.params, ck.bounds, cfg.env, n, a.episodes, m, a.seeds, jobs);
      cells.push_back({{"targets", n}, {"motion", toString(m)}, {"mean", s.mean}, {"std", s.std_dev}, {"rewards", s.rewards}});
      grid.back().push_back(std::move(s));
    }
  }

  out << std::left << std::setw(10) << "motion";
  for (int n : a.targets) out << " | " << std::setw(16) << (std::to_string(n) + " targets");
  out << '\n';
  for (std::size_t i = 0; i < motions.size(); ++i) {
    out << std::setw(10) << toString(motions[i]);
    for (const auto& s : grid[i]) out << " | " << std::setw(16) << meanStd(s.mean, s.std_dev);
    out << '\n';
  }
  out << std::right;

  const fs::path path = a.out_path;
  writeJson(path, {{"checkpoint", a.checkpoint},
                   {"episodes", a.episodes},
                   {"seeds", a.seeds},
                   {"epoch", ck.epoch},
                   {"training_seed", ck.training_seed},
                   {"cells", cells}});
  echoConfig(path.has_parent_path() ? path.parent_path() : fs::path("."), cfg);
  return kOk;
}

// ---- rollout ----

struct RolloutArgs {
  ConfigFlags config;
  std::string checkpoint;
  int targets = 3;
  std::string motion = "biased";
  std::uint64_t seed = 0;
  int episode = 0;
  std::string mode = "eval";
  std::string export_path = "trace.json";
};

int cmdRollout(const RolloutArgs& a, std::ostream& out) {
  const RunConfig cfg = a.config.load({});
  const Checkpoint ck = checkpoint::load(a.checkpoint);
  if (a.targets < 1 || a.targets > ck.params.layout.max_targets) throw ConfigError("rollout: --targets out of range");
  if (a.episode < 0) throw ConfigError("rollout: --episode must be >= 0");
  const Scenario sc = sampleScenario(
      ScenarioConfig::from(cfg.env, a.targets, parseMotion(a.motion), evalScenarioSeed(a.seed, a.episode)), cfg.env);
  EpisodeTrace trace;
  if (a.mode == "eval") {
    trace = rolloutEval(sc, ck.params, ck.bounds, cfg.env);
  } else if (a.mode == "train") {
    TrainRolloutOptions opts;
    opts.compute_gradient = false;
    trace = rolloutTrain(sc, ck.params, ck.bounds, cfg.env, opts).trace;
  } else {
    throw ConfigError("rollout: --mode must be eval or train");
  }

  fs::path json_path = a.export_path;
  if (json_path.extension() != ".json") json_path += ".json";
  fs::path csv_path = json_path;
  csv_path.replace_extension(".csv");
  if (json_path.has_parent_path()) fs::create_directories(json_path.parent_path());
  trace_io::save(json_path, csv_path, trace);
  echoConfig(json_path.has_parent_path() ? json_path.parent_path() : fs::path("."), cfg);
  out << "steps " << trace.steps.size() << "  reward_normalized " << formatDouble(trace.reward_normalized) << '\n'
      << "wrote " << json_path.string() << " and " << csv_path.string() << '\n';
  return kOk;
}

// ---- gradcheck ----

struct GradCheckArgs {
  int trials = 20;
  int horizon = 5;
  int targets = 2;
  std::uint64_t seed = 0;
  bool corrupt_dexp = false;
};

int cmdGradCheck(const GradCheckArgs& a, std::ostream& out) {
  if (a.trials < 1 || a.horizon < 0 || a.targets < 1) throw ConfigError("gradcheck: invalid trial settings");
  GradCheckOptions opts;
  opts.trials = a.trials;
  opts.horizon = a.horizon;
  opts.targets = a.targets;
  opts.max_targets = std::max(opts.max_targets, a.targets);
  opts.seed = a.seed;
  if (a.corrupt_dexp)
    opts.dexp = [](const Twist<double>& u, double tau, int j) { return Pose<double>(1.01 * dexpDu(u, tau, j)); };
  const GradCheckReport r = runGradCheck(opts);
  for (const auto& t : r.trials)
    out << "trial " << std::setw(2) << t.index << "  n_p " << t.num_params << "  max_abs " << formatDouble(t.max_abs_err)
        << "  max_rel " << formatDouble(t.max_rel_err) << "  refined " << t.refined << (t.pass ? "  ok" : "  FAIL")
        << '\n';
  out << "max_abs_err " << formatDouble(r.max_abs_err) << "\nmax_rel_err " << formatDouble(r.max_rel_err) << "\nseconds "
      << formatDouble(r.seconds) << '\n'
      << (r.pass ? "PASS" : "FAIL") << '\n';
  return r.pass ? kOk : kGradCheckFailed;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Model-based policy gradients for active multi-target tracking"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a policy and write checkpoints plus a CSV log");
  train_args.config.attach(train_cmd, true);
  train_cmd->add_option("--out", train_args.out_dir, "Output directory")->required();
  auto* seed_opt = train_cmd->add_option("--seed", train_args.seed, "Overrides trainer.seed");
  train_cmd->add_option("--epochs", train_args.epochs, "Overrides trainer.epochs");
  train_cmd->add_option("--episodes-per-batch", train_args.episodes_per_batch, "Overrides trainer.episodes_per_batch");
  train_cmd->add_option("--lr", train_args.learning_rate, "Overrides trainer.learning_rate");
  train_cmd->add_option("--jobs", train_args.jobs, "Parallel rollouts (default: ATPG_JOBS or hardware threads)");
  train_cmd->add_flag("--quiet", train_args.quiet, "No per-epoch progress");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint over a grid of target counts and motions");
  eval_args.config.attach(eval_cmd, false);
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--targets", eval_args.targets, "Target counts")->capture_default_str();
  eval_cmd->add_option("--episodes", eval_args.episodes, "Episodes per seed")->capture_default_str();
  eval_cmd->add_option("--motion", eval_args.motions, "biased and/or unbiased")->capture_default_str();
  eval_cmd->add_option("--seeds", eval_args.seeds, "Evaluation seeds")->capture_default_str();
  eval_cmd->add_option("--out", eval_args.out_path, "JSON results path")->capture_default_str();
  eval_cmd->add_option("--jobs", eval_args.jobs, "Parallel rollouts");

  RolloutArgs rollout_args;
  auto* rollout_cmd = app.add_subcommand("rollout", "Run one episode and export its trace as JSON and CSV");
  rollout_args.config.attach(rollout_cmd, false);
  rollout_cmd->add_option("--checkpoint", rollout_args.checkpoint, "Checkpoint file")->required();
  rollout_cmd->add_option("--targets", rollout_args.targets, "Number of targets")->capture_default_str();
  rollout_cmd->add_option("--motion", rollout_args.motion, "biased or unbiased")->capture_default_str();
  rollout_cmd->add_option("--seed", rollout_args.seed, "Scenario seed")->capture_default_str();
  rollout_cmd->add_option("--episode", rollout_args.episode, "Episode index under the seed")->capture_default_str();
  rollout_cmd->add_option("--mode", rollout_args.mode, "eval (hard FoV, sampled measurements) or train")
      ->capture_default_str();
  rollout_cmd->add_option("--export", rollout_args.export_path, "Trace path; the CSV sits next to it")
      ->capture_default_str();

  GradCheckArgs gc_args;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Compare analytical gradients with central finite differences");
  gc_cmd->add_option("--trials", gc_args.trials)->capture_default_str();
  gc_cmd->add_option("--horizon", gc_args.horizon)->capture_default_str();
  gc_cmd->add_option("--targets", gc_args.targets)->capture_default_str();
  gc_cmd->add_option("--seed", gc_args.seed)->capture_default_str();
  gc_cmd->add_flag("--corrupt-dexp", gc_args.corrupt_dexp)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, e2;
    const int code = app.exit(e, o, e2);
    out << o.str();
    err << e2.str();
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*train_cmd) return cmdTrain(train_args, out, err, seed_opt->count() > 0);
    if (*eval_cmd) return cmdEval(eval_args, out);
    if (*rollout_cmd) return cmdRollout(rollout_args, out);
    if (*gc_cmd) return cmdGradCheck(gc_args, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kInvalidConfig;
  } catch (const ChecksumMismatch& e) {
    err << "error: corrupt checkpoint: " << e.what() << '\n';
    return kCorruptCheckpoint;
  } catch (const CheckpointFormatError& e) {
    err << "error: corrupt checkpoint: " << e.what() << '\n';
    return kCorruptCheckpoint;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kInvalidConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}

}  // namespace atpg::cli
