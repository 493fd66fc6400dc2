#include "atpg/sim.hpp"

#include <cmath>
#include <stdexcept>

#include "atpg/random.hpp"

namespace atpg {
namespace {

Eigen::VectorXd uniformBox(std::mt19937_64& rng, int dim, double half_width) {
  std::uniform_real_distribution<double> u(-half_width, half_width);
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v(i) = u(rng);
  return v;
}

Eigen::VectorXd gaussian(std::mt19937_64& rng, int dim, double std_dev) {
  std::normal_distribution<double> n(0.0, std_dev);
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v(i) = n(rng);
  return v;
}

StepRecord record(int t, const Pose<double>& T, const std::vector<TargetBelief<double>>& beliefs,
                  const std::vector<Eigen::VectorXd>& truth, const EnvConfig& env) {
  StepRecord r;
  r.t = t;
  r.pose = T;
  r.targets.reserve(beliefs.size());
  for (std::size_t j = 0; j < beliefs.size(); ++j) {
    TargetRecord tr;
    tr.truth = truth[j];
    tr.mean = beliefs[j].mean;
    tr.info = beliefs[j].info;
    tr.weight = belief::visibilityWeight(T, beliefs[j].mean, env.fov, env.probit);
    tr.in_fov = insideFov(bodyFrame(T, zeta(truth[j])), env.fov);
    r.targets.push_back(std::move(tr));
  }
  return r;
}

double sumLogDet(const std::vector<TargetBelief<double>>& beliefs) {
  double r = 0.0;
  for (const auto& b : beliefs) r += belief::logDet(b.info);
  return r;
}

void advanceTruth(std::vector<Eigen::VectorXd>& truth, const Scenario& sc, int k, const TargetModel<double>& m) {
  for (std::size_t j = 0; j < truth.size(); ++j)
    truth[j] = m.A * truth[j] + m.B * sc.xi[j][k] + sc.process_noise[j][k];
}

/// Shared train-mode loop. When `params` is given the controls come from the
/// policy and, if requested, the perturbation state is propagated alongside.
struct TrainLoop {
  const Scenario& sc;
  const EnvConfig& env;
  const TargetModel<double> model;

  TrainRollout run(const std::function<Twist<double>(int, const Pose<double>&, const std::vector<TargetBelief<double>>&)>& control,
                   const PolicyParams* params, const ControlBounds* bounds, const TrainRolloutOptions& opts) const {
    const int K = sc.cfg.horizon;
    const int n = sc.numTargets();
    const bool grad = params != nullptr && opts.compute_gradient;
    const double tau = sc.cfg.tau;

    TrainRollout out;
    out.trace.tau = tau;
    out.trace.steps.reserve(K + 1);
    Pose<double> T = sc.agent0;
    std::vector<Eigen::VectorXd> truth = sc.targets0;
    std::vector<TargetBelief<double>> post = sc.beliefs0;
    std::vector<TargetBelief<double>> prior(n);
    std::vector<Eigen::MatrixXd> dP(n);
    PerturbationState state;
    if (grad) state = PerturbationState::zero(n, model.stateDim(), params->layout.num_params);

    out.trace.steps.push_back(record(0, T, post, truth, env));
    for (int k = 0; k < K; ++k) {
      for (int j = 0; j < n; ++j) {
        prior[j] = belief::predict(post[j], sc.xi[j][k], model);
        if (grad) dP[j] = gradient::priorInfoSensitivity(state.omega[j], post[j], prior[j], model);
      }

      Twist<double> u;
      Eigen::MatrixXd J;
      if (params != nullptr) {
        const PolicyInput input = buildInput(T, prior, params->layout.max_targets);
        PolicyOutput res = forward(input, *params, *bounds);
        u = res.u;
        if (grad) {
          PolicyJacobians jac = jacobians(res.cache, *params);
          J = std::move(jac.params);
          if (opts.state_feedback) J += gradient::feedbackJacobian(jac.input, state, T, dP, params->layout);
        }
      } else {
        u = control(k, T, prior);
      }

      const Pose<double> T_next = compose(T, expmap(u, tau));
      if (grad) gradient::stepLambda(state, T, u, J, tau, opts.dexp);
      for (int j = 0; j < n; ++j) {
        post[j] = belief::smoothUpdate(prior[j], T_next, model, env.fov, env.probit);
        if (grad) gradient::stepOmega(state, j, dP[j], prior[j], T_next, model, env.fov, env.probit);
      }
      advanceTruth(truth, sc, k, model);
      T = T_next;
      out.trace.steps.back().u = u;
      out.trace.steps.push_back(record(k + 1, T, post, truth, env));
    }
    out.reward = sumLogDet(post);
    out.trace.reward = out.reward;
    out.trace.reward_normalized = out.reward / n;
    out.gradient = grad ? gradient::rewardGradient(post, state) : Eigen::VectorXd();
    return out;
  }
};

EpisodeTrace evalLoop(const Scenario& sc, const EnvConfig& env,
                      const std::function<Twist<double>(int, const Pose<double>&, const std::vector<TargetBelief<double>>&)>& control) {
  const TargetModel<double> model = env.model();
  const int K = sc.cfg.horizon;
  const int n = sc.numTargets();
  const double tau = sc.cfg.tau;

  EpisodeTrace trace;
  trace.tau = tau;
  trace.steps.reserve(K + 1);
  Pose<double> T = sc.agent0;
  std::vector<Eigen::VectorXd> truth = sc.targets0;
  std::vector<TargetBelief<double>> post = sc.beliefs0;
  std::vector<TargetBelief<double>> prior(n);

  trace.steps.push_back(record(0, T, post, truth, env));
  for (int k = 0; k < K; ++k) {
    for (int j = 0; j < n; ++j) prior[j] = belief::predict(post[j], sc.xi[j][k], model);
    const Twist<double> u = control(k, T, prior);
    const Pose<double> T_next = compose(T, expmap(u, tau));
    advanceTruth(truth, sc, k, model);
    for (int j = 0; j < n; ++j) {
      const bool seen = insideFov(bodyFrame(T_next, zeta(truth[j])), env.fov);
      TargetBelief<double> b = prior[j];
      if (seen) {
        const Eigen::VectorXd z = model.H * truth[j] + sc.sensor_noise[j][k];
        b = belief::hardUpdate(prior[j], z, model);
      }
      if (env.eval_reward == RewardAccounting::Smooth)
        b.info = belief::smoothUpdate(prior[j], T_next, model, env.fov, env.probit).info;
      post[j] = std::move(b);
    }
    T = T_next;
    trace.steps.back().u = u;
    trace.steps.push_back(record(k + 1, T, post, truth, env));
  }
  trace.reward = sumLogDet(post);
  trace.reward_normalized = trace.reward / n;
  return trace;
}

}  // namespace

Motion parseMotion(const std::string& s) {
  if (s == "biased") return Motion::Biased;
  if (s == "unbiased") return Motion::Unbiased;
  throw std::invalid_argument("unknown motion '" + s + "' (expected biased or unbiased)");
}

std::string toString(Motion m) { return m == Motion::Biased ? "biased" : "unbiased"; }

RewardAccounting parseRewardAccounting(const std::string& s) {
  if (s == "hard") return RewardAccounting::Hard;
  if (s == "smooth") return RewardAccounting::Smooth;
  throw std::invalid_argument("unknown reward accounting '" + s + "' (expected hard or smooth)");
}

std::string toString(RewardAccounting r) { return r == RewardAccounting::Hard ? "hard" : "smooth"; }

void EnvConfig::validate() const {
  fov.validate();
  probit.validate();
  if (!(sensor_std > 0.0)) throw std::invalid_argument("env: sensor_std must be positive");
  if (!(motion_std > 0.0)) throw std::invalid_argument("env: motion_std must be positive");
  if (!(tau > 0.0)) throw std::invalid_argument("env: tau must be positive");
  if (horizon_base < 0 || horizon_per_target < 0) throw std::invalid_argument("env: horizon terms must be non-negative");
  if (!(box_base >= 0.0) || !(box_per_target >= 0.0)) throw std::invalid_argument("env: spawn box terms must be non-negative");
  if (!(xi_bound >= 0.0) || !(bias_bound >= 0.0)) throw std::invalid_argument("env: input bounds must be non-negative");
  if (!(init_info > 0.0)) throw std::invalid_argument("env: init_info must be positive");
}

ScenarioConfig ScenarioConfig::from(const EnvConfig& env, int n_targets, Motion motion, std::uint64_t seed) {
  ScenarioConfig c;
  c.n_targets = n_targets;
  c.horizon = env.horizonFor(n_targets);
  c.tau = env.tau;
  c.init_box = env.boxFor(n_targets);
  c.xi_bound = env.xi_bound;
  c.bias_bound = env.bias_bound;
  c.motion = motion;
  c.seed = seed;
  return c;
}

void ScenarioConfig::validate() const {
  if (n_targets < 1) throw std::invalid_argument("scenario: n_targets must be >= 1");
  if (horizon < 0) throw std::invalid_argument("scenario: horizon must be >= 0");
  if (!(tau > 0.0)) throw std::invalid_argument("scenario: tau must be positive");
  if (!(init_box >= 0.0)) throw std::invalid_argument("scenario: init_box must be non-negative");
}

Scenario sampleScenario(const ScenarioConfig& cfg, const EnvConfig& env) {
  cfg.validate();
  constexpr int kDim = 2;
  Scenario sc;
  sc.cfg = cfg;

  auto layout = makeStream(cfg.seed, 0, StreamTag::Layout);
  const Eigen::VectorXd agent_xy = uniformBox(layout, kDim, cfg.init_box);
  std::uniform_real_distribution<double> heading(-M_PI, M_PI);
  sc.agent0 = planarPose(agent_xy(0), agent_xy(1), heading(layout));
  for (int j = 0; j < cfg.n_targets; ++j) {
    Eigen::VectorXd y = uniformBox(layout, kDim, cfg.init_box);
    TargetBelief<double> b;
    b.mean = y + gaussian(layout, kDim, env.motion_std);
    b.info = env.init_info * Eigen::MatrixXd::Identity(kDim, kDim);
    sc.targets0.push_back(std::move(y));
    sc.beliefs0.push_back(std::move(b));
  }

  // One drift shared by all targets, so the group moves in a common direction.
  auto inputs = makeStream(cfg.seed, 0, StreamTag::TargetInput);
  Eigen::Vector2d bias = Eigen::Vector2d::Zero();
  if (cfg.motion == Motion::Biased) bias = uniformBox(inputs, kDim, cfg.bias_bound);
  sc.bias.assign(cfg.n_targets, bias);

  auto process = makeStream(cfg.seed, 0, StreamTag::ProcessNoise);
  auto sensor = makeStream(cfg.seed, 0, StreamTag::SensorNoise);
  sc.xi.resize(cfg.n_targets);
  sc.process_noise.resize(cfg.n_targets);
  sc.sensor_noise.resize(cfg.n_targets);
  for (int j = 0; j < cfg.n_targets; ++j) {
    for (int k = 0; k < cfg.horizon; ++k) {
      sc.xi[j].push_back(bias + uniformBox(inputs, kDim, cfg.xi_bound));
      sc.process_noise[j].push_back(gaussian(process, kDim, env.motion_std));
      sc.sensor_noise[j].push_back(gaussian(sensor, kDim, env.sensor_std));
    }
  }
  return sc;
}

TrainRollout rolloutTrain(const Scenario& scenario, const PolicyParams& params, const ControlBounds& bounds,
                          const EnvConfig& env, const TrainRolloutOptions& opts) {
  const TrainLoop loop{scenario, env, env.model()};
  return loop.run({}, &params, &bounds, opts);
}

EpisodeTrace rolloutEval(const Scenario& scenario, const PolicyParams& params, const ControlBounds& bounds,
                         const EnvConfig& env) {
  return evalLoop(scenario, env, [&](int, const Pose<double>& T, const std::vector<TargetBelief<double>>& priors) {
    return forward(buildInput(T, priors, params.layout.max_targets), params, bounds).u;
  });
}

EpisodeTrace rolloutEvalScripted(const Scenario& scenario, const ControlLaw& law, const EnvConfig& env) {
  return evalLoop(scenario, env, [&](int k, const Pose<double>& T, const std::vector<TargetBelief<double>>& priors) {
    return law(k, T, priors);
  });
}

double rewardTrainScripted(const Scenario& scenario, const ControlLaw& law, const EnvConfig& env) {
  const TrainLoop loop{scenario, env, env.model()};
  TrainRolloutOptions opts;
  opts.compute_gradient = false;
  return loop
      .run([&](int k, const Pose<double>& T, const std::vector<TargetBelief<double>>& priors) { return law(k, T, priors); },
           nullptr, nullptr, opts)
      .reward;
}

std::vector<Pose<double>> replayPoses(const Pose<double>& start, const std::vector<Twist<double>>& controls, double tau) {
  std::vector<Pose<double>> poses{start};
  poses.reserve(controls.size() + 1);
  for (const auto& u : controls) poses.push_back(compose(poses.back(), expmap(u, tau)));
  return poses;
}

}  // namespace atpg
