#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "atpg/checkpoint.hpp"
#include "atpg/policy.hpp"
#include "atpg/sim.hpp"

namespace atpg {

class NonFiniteGradient : public std::runtime_error {
public:
  NonFiniteGradient(int epoch, int episode, std::uint64_t scenario_seed, int n_targets);
  int epoch;
  int episode;
  std::uint64_t scenario_seed;
  int n_targets;
};

struct TrainConfig {
  int epochs = 300;
  int episodes_per_batch = 20;
  double learning_rate = 1e-2;
  double momentum = 0.0;
  /// Global-norm clipping threshold; infinity disables clipping.
  double clip_norm = 10.0;
  int targets_min = 3;
  int targets_max = 8;
  Motion motion = Motion::Biased;
  int eval_every = 10;
  int eval_episodes = 20;
  std::uint64_t seed = 0;
  std::filesystem::path checkpoint_dir;  // empty: no checkpoints
  int jobs = 1;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double reward_train_mean = 0.0;
  double reward_train_std = 0.0;
  double reward_eval_mean = std::numeric_limits<double>::quiet_NaN();
  double reward_eval_std = std::numeric_limits<double>::quiet_NaN();
  double grad_norm = 0.0;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;

  /// epoch,reward_train_mean,reward_train_std,reward_eval_mean,reward_eval_std,grad_norm,seconds
  void writeCsv(std::ostream& out) const;
};

struct TrainResult {
  PolicyParams params;
  TrainLog log;
};

/// Training episodes of one epoch: scenario seed and target count per slot.
struct EpisodeSpec {
  std::uint64_t scenario_seed = 0;
  int n_targets = 0;
};

std::vector<EpisodeSpec> trainingEpisodes(const TrainConfig& cfg, int epoch);
std::vector<EpisodeSpec> heldOutEpisodes(const TrainConfig& cfg);

/// Mean of per-episode gradients, accumulated in episode order.
Eigen::VectorXd batchGradient(const std::vector<Eigen::VectorXd>& gradients);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Gradient ascent on the train-mode objective over batches of episodes.
TrainResult train(const TrainConfig& cfg, const EnvConfig& env, const PolicyParams& initial, const ControlBounds& bounds,
                  const EpochCallback& on_epoch = {});

struct EvalSummary {
  int n_targets = 0;
  Motion motion = Motion::Biased;
  std::vector<double> rewards;  // normalized, in (seed, episode) order
  double mean = 0.0;
  double std_dev = 0.0;         // population standard deviation
};

/// Eval-mode rollouts over episodes x seeds.
EvalSummary evaluate(const PolicyParams& params, const ControlBounds& bounds, const EnvConfig& env, int n_targets,
                     int episodes, Motion motion, const std::vector<std::uint64_t>& seeds, int jobs = 1);

EvalSummary evaluateScripted(const ControlLaw& law, const EnvConfig& env, int n_targets, int episodes, Motion motion,
                             const std::vector<std::uint64_t>& seeds);

std::uint64_t evalScenarioSeed(std::uint64_t seed, int episode);

/// Mean and population standard deviation.
std::pair<double, double> meanStd(const std::vector<double>& v);

}  // namespace atpg
