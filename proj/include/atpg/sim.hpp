#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "atpg/belief.hpp"
#include "atpg/fov.hpp"
#include "atpg/gradient.hpp"
#include "atpg/liegroup.hpp"
#include "atpg/policy.hpp"

namespace atpg {

enum class Motion { Unbiased, Biased };
enum class RewardAccounting { Hard, Smooth };

Motion parseMotion(const std::string& s);
std::string toString(Motion m);
RewardAccounting parseRewardAccounting(const std::string& s);
std::string toString(RewardAccounting r);

/// Physical and protocol constants shared by every episode.
struct EnvConfig {
  FovShape fov;
  ProbitParams probit;
  double sensor_std = 0.2;   // sigma_1
  double motion_std = 0.05;  // sigma_2
  double tau = 0.5;
  // horizon K = horizon_base + horizon_per_target * n_l
  int horizon_base = 25;
  int horizon_per_target = 5;
  // spawn half-width = box_base + box_per_target * n_l
  double box_base = 2.0;
  double box_per_target = 1.0;
  double xi_bound = 0.2;
  double bias_bound = 0.2;
  double init_info = 1.0;  // Y_0 = init_info * I
  RewardAccounting eval_reward = RewardAccounting::Hard;

  void validate() const;
  TargetModel<double> model() const { return TargetModel<double>::planar(sensor_std, motion_std); }
  int horizonFor(int n_targets) const { return horizon_base + horizon_per_target * n_targets; }
  double boxFor(int n_targets) const { return box_base + box_per_target * n_targets; }
};

struct ScenarioConfig {
  int n_targets = 3;
  int horizon = 40;
  double tau = 0.5;
  double init_box = 5.0;
  double xi_bound = 0.2;
  double bias_bound = 0.2;
  Motion motion = Motion::Biased;
  std::uint64_t seed = 0;

  static ScenarioConfig from(const EnvConfig& env, int n_targets, Motion motion, std::uint64_t seed);
  void validate() const;
};

/// A fully sampled episode: initial conditions and every random input, so
/// train and eval rollouts of the same scenario see identical targets.
struct Scenario {
  ScenarioConfig cfg;
  Pose<double> agent0 = Pose<double>::Identity();
  std::vector<Eigen::VectorXd> targets0;
  std::vector<TargetBelief<double>> beliefs0;
  std::vector<Eigen::Vector2d> bias;                        // drift per target; one shared draw per episode
  std::vector<std::vector<Eigen::VectorXd>> xi;             // [target][step]
  std::vector<std::vector<Eigen::VectorXd>> process_noise;  // [target][step]
  std::vector<std::vector<Eigen::VectorXd>> sensor_noise;   // [target][step], for step k+1

  int numTargets() const { return static_cast<int>(targets0.size()); }
};

Scenario sampleScenario(const ScenarioConfig& cfg, const EnvConfig& env);

struct TargetRecord {
  Eigen::VectorXd truth;
  Eigen::VectorXd mean;
  Eigen::MatrixXd info;
  double weight = 0.0;  // 1 - Phi(d) at the belief mean
  bool in_fov = false;  // exact membership of the true target
};

struct StepRecord {
  int t = 0;
  Pose<double> pose = Pose<double>::Identity();
  Twist<double> u = Twist<double>::Zero();  // control applied over [t, t+1]; zero at the terminal step
  std::vector<TargetRecord> targets;
};

struct EpisodeTrace {
  double tau = 0.5;
  std::vector<StepRecord> steps;  // K + 1 states
  double reward = 0.0;            // sum_j log det Y_K
  double reward_normalized = 0.0; // reward / n_l

  int horizon() const { return static_cast<int>(steps.size()) - 1; }
};

struct TrainRolloutOptions {
  bool compute_gradient = true;
  /// Include d s_k / d theta (the policy input depends on past controls).
  bool state_feedback = true;
  DexpFunction dexp;  // override for tests; empty uses dexpDu
};

struct TrainRollout {
  EpisodeTrace trace;
  double reward = 0.0;
  Eigen::VectorXd gradient;
};

/// Measurement-free rollout with the differentiable FoV; returns the
/// objective sum_j log det Y_K and its gradient in the policy parameters.
TrainRollout rolloutTrain(const Scenario& scenario, const PolicyParams& params, const ControlBounds& bounds,
                          const EnvConfig& env, const TrainRolloutOptions& opts = {});

/// Rollout with sampled measurements and hard-FoV Kalman updates.
EpisodeTrace rolloutEval(const Scenario& scenario, const PolicyParams& params, const ControlBounds& bounds,
                         const EnvConfig& env);

/// Control source for scripted baselines.
using ControlLaw = std::function<Twist<double>(int step, const Pose<double>& T, std::span<const TargetBelief<double>> priors)>;

EpisodeTrace rolloutEvalScripted(const Scenario& scenario, const ControlLaw& law, const EnvConfig& env);
double rewardTrainScripted(const Scenario& scenario, const ControlLaw& law, const EnvConfig& env);

/// Poses obtained by composing exp(tau u_t) along the recorded controls.
std::vector<Pose<double>> replayPoses(const Pose<double>& start, const std::vector<Twist<double>>& controls, double tau);

}  // namespace atpg
