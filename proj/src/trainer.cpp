#include "atpg/trainer.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <string>

#include "atpg/parallel.hpp"
#include "atpg/random.hpp"

namespace atpg {
namespace {

std::string formatDouble(double x) {
  if (std::isnan(x)) return "nan";
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

EpisodeSpec specFor(std::uint64_t seed, std::uint64_t index, StreamTag tag, const TrainConfig& cfg) {
  EpisodeSpec s;
  s.scenario_seed = streamSeed(seed, index, tag);
  auto rng = makeStream(s.scenario_seed, index, StreamTag::TargetCount);
  std::uniform_int_distribution<int> count(cfg.targets_min, cfg.targets_max);
  s.n_targets = count(rng);
  return s;
}

}  // namespace

NonFiniteGradient::NonFiniteGradient(int epoch_, int episode_, std::uint64_t seed_, int n_targets_)
    : std::runtime_error("non-finite gradient at epoch " + std::to_string(epoch_) + ", episode " +
                         std::to_string(episode_) + " (scenario seed " + std::to_string(seed_) + ", " +
                         std::to_string(n_targets_) + " targets)"),
      epoch(epoch_),
      episode(episode_),
      scenario_seed(seed_),
      n_targets(n_targets_) {}

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("trainer: epochs must be >= 0");
  if (episodes_per_batch < 1) throw std::invalid_argument("trainer: episodes_per_batch must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("trainer: learning_rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("trainer: momentum must lie in [0, 1)");
  if (!(clip_norm > 0.0)) throw std::invalid_argument("trainer: clip_norm must be positive");
  if (targets_min < 1 || targets_max < targets_min) throw std::invalid_argument("trainer: invalid target count range");
  if (eval_every < 0 || eval_episodes < 0) throw std::invalid_argument("trainer: eval settings must be non-negative");
  if (jobs < 1) throw std::invalid_argument("trainer: jobs must be >= 1");
}

void TrainLog::writeCsv(std::ostream& out) const {
  out << "epoch,reward_train_mean,reward_train_std,reward_eval_mean,reward_eval_std,grad_norm,seconds\n";
  for (const auto& r : epochs)
    out << r.epoch << ',' << formatDouble(r.reward_train_mean) << ',' << formatDouble(r.reward_train_std) << ','
        << formatDouble(r.reward_eval_mean) << ',' << formatDouble(r.reward_eval_std) << ',' << formatDouble(r.grad_norm)
        << ',' << formatDouble(r.seconds) << '\n';
}

std::vector<EpisodeSpec> trainingEpisodes(const TrainConfig& cfg, int epoch) {
  std::vector<EpisodeSpec> specs;
  for (int e = 0; e < cfg.episodes_per_batch; ++e) {
    const auto index = static_cast<std::uint64_t>(epoch) * cfg.episodes_per_batch + e;
    specs.push_back(specFor(cfg.seed, index, StreamTag::TrainEpisode, cfg));
  }
  return specs;
}

std::vector<EpisodeSpec> heldOutEpisodes(const TrainConfig& cfg) {
  std::vector<EpisodeSpec> specs;
  for (int e = 0; e < cfg.eval_episodes; ++e) specs.push_back(specFor(cfg.seed, e, StreamTag::HeldOutEpisode, cfg));
  return specs;
}

Eigen::VectorXd batchGradient(const std::vector<Eigen::VectorXd>& gradients) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(gradients.front().size());
  for (const auto& gi : gradients) g += gi;
  return g / static_cast<double>(gradients.size());
}

std::pair<double, double> meanStd(const std::vector<double>& v) {
  if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  return {mean, std::sqrt(var / static_cast<double>(v.size()))};
}

TrainResult train(const TrainConfig& cfg, const EnvConfig& env, const PolicyParams& initial, const ControlBounds& bounds,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  env.validate();
  bounds.validate();

  TrainResult result;
  result.params = initial;
  Eigen::VectorXd velocity = Eigen::VectorXd::Zero(initial.theta.size());
  const auto held_out = heldOutEpisodes(cfg);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const auto specs = trainingEpisodes(cfg, epoch);
    const int n = static_cast<int>(specs.size());
    std::vector<Eigen::VectorXd> grads(n);
    std::vector<double> rewards(n);
    const PolicyParams& snapshot = result.params;
    parallelFor(n, cfg.jobs, [&](int e) {
      const Scenario sc = sampleScenario(ScenarioConfig::from(env, specs[e].n_targets, cfg.motion, specs[e].scenario_seed), env);
      TrainRollout r = rolloutTrain(sc, snapshot, bounds, env);
      rewards[e] = r.trace.reward_normalized;
      grads[e] = std::move(r.gradient);
    });
    for (int e = 0; e < n; ++e)
      if (!grads[e].allFinite()) throw NonFiniteGradient(epoch, e, specs[e].scenario_seed, specs[e].n_targets);

    Eigen::VectorXd g = batchGradient(grads);
    EpochRecord rec;
    rec.epoch = epoch;
    std::tie(rec.reward_train_mean, rec.reward_train_std) = meanStd(rewards);
    rec.grad_norm = g.norm();
    if (std::isfinite(cfg.clip_norm) && rec.grad_norm > cfg.clip_norm) g *= cfg.clip_norm / rec.grad_norm;
    velocity = cfg.momentum * velocity + g;
    result.params.theta += cfg.learning_rate * velocity;

    const bool eval_now = cfg.eval_every > 0 && ((epoch + 1) % cfg.eval_every == 0 || epoch + 1 == cfg.epochs);
    if (eval_now && !held_out.empty()) {
      std::vector<double> eval_rewards(held_out.size());
      parallelFor(static_cast<int>(held_out.size()), cfg.jobs, [&](int e) {
        const Scenario sc =
            sampleScenario(ScenarioConfig::from(env, held_out[e].n_targets, cfg.motion, held_out[e].scenario_seed), env);
        eval_rewards[e] = rolloutEval(sc, result.params, bounds, env).reward_normalized;
      });
      std::tie(rec.reward_eval_mean, rec.reward_eval_std) = meanStd(eval_rewards);
    }
    if (eval_now && !cfg.checkpoint_dir.empty()) {
      std::filesystem::create_directories(cfg.checkpoint_dir);
      Checkpoint ck{result.params, bounds, cfg.seed, epoch + 1};
      std::ostringstream name;
      name << "epoch_" << std::setw(5) << std::setfill('0') << epoch + 1 << ".atpg";
      checkpoint::save(cfg.checkpoint_dir / name.str(), ck);
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

std::uint64_t evalScenarioSeed(std::uint64_t seed, int episode) {
  return streamSeed(seed, static_cast<std::uint64_t>(episode), StreamTag::EvalEpisode);
}

EvalSummary evaluate(const PolicyParams& params, const ControlBounds& bounds, const EnvConfig& env, int n_targets,
                     int episodes, Motion motion, const std::vector<std::uint64_t>& seeds, int jobs) {
  EvalSummary s;
  s.n_targets = n_targets;
  s.motion = motion;
  const int total = episodes * static_cast<int>(seeds.size());
  s.rewards.assign(total, 0.0);
  parallelFor(total, jobs, [&](int idx) {
    const auto seed = seeds[idx / episodes];
    const Scenario sc = sampleScenario(ScenarioConfig::from(env, n_targets, motion, evalScenarioSeed(seed, idx % episodes)), env);
    s.rewards[idx] = rolloutEval(sc, params, bounds, env).reward_normalized;
  });
  std::tie(s.mean, s.std_dev) = meanStd(s.rewards);
  return s;
}

EvalSummary evaluateScripted(const ControlLaw& law, const EnvConfig& env, int n_targets, int episodes, Motion motion,
                             const std::vector<std::uint64_t>& seeds) {
  EvalSummary s;
  s.n_targets = n_targets;
  s.motion = motion;
  for (const auto seed : seeds)
    for (int e = 0; e < episodes; ++e) {
      const Scenario sc = sampleScenario(ScenarioConfig::from(env, n_targets, motion, evalScenarioSeed(seed, e)), env);
      s.rewards.push_back(rolloutEvalScripted(sc, law, env).reward_normalized);
    }
  std::tie(s.mean, s.std_dev) = meanStd(s.rewards);
  return s;
}

}  // namespace atpg
