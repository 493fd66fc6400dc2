#include "atpg/gradcheck.hpp"

#include <chrono>
#include <cmath>

#include "atpg/random.hpp"

namespace atpg {
namespace {

double trainReward(const GradCheckCase& c, const PolicyParams& params) {
  TrainRolloutOptions opts;
  opts.compute_gradient = false;
  return rolloutTrain(c.scenario, params, c.bounds, c.env, opts).reward;
}

bool within(double analytic, double numeric, const GradCheckOptions& o, double& rel, double& abs_err) {
  abs_err = std::abs(analytic - numeric);
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  rel = scale > 0.0 ? abs_err / scale : 0.0;
  return abs_err <= o.abs_tol || rel <= o.rel_tol;
}

}  // namespace

GradCheckCase makeGradCheckCase(const GradCheckOptions& opts, int trial) {
  GradCheckCase c;
  // Small arena so targets cross the FoV boundary and the probit term is active.
  c.env.box_base = 1.5;
  c.env.box_per_target = 0.0;
  const std::uint64_t scenario_seed = streamSeed(opts.seed, trial, StreamTag::GradCheck);
  ScenarioConfig cfg = ScenarioConfig::from(c.env, opts.targets, Motion::Biased, scenario_seed);
  cfg.horizon = opts.horizon;
  c.scenario = sampleScenario(cfg, c.env);

  auto rng = makeStream(scenario_seed, 1, StreamTag::GradCheck);
  std::uniform_real_distribution<double> heading(-0.3, 0.3);
  std::uniform_real_distribution<double> offset(-1.0, 0.0);
  // Start behind the targets, facing them, heading near zero so the yaw
  // never wraps through pi within a short horizon.
  c.scenario.agent0 = planarPose(offset(rng) - 1.0, offset(rng) + 0.5, heading(rng));

  const PolicyLayout layout = PolicyLayout::make(2, opts.max_targets, opts.widths);
  c.params = PolicyParams::initialize(layout, 4.0, streamSeed(scenario_seed, 2, StreamTag::PolicyInit));
  std::normal_distribution<double> jitter(0.0, 0.1);
  for (Eigen::Index i = 0; i < c.params.theta.size(); ++i) c.params.theta(i) += jitter(rng);
  return c;
}

double finiteDifference(const GradCheckCase& c, Eigen::Index i, double step) {
  PolicyParams plus = c.params;
  PolicyParams minus = c.params;
  plus.theta(i) += step;
  minus.theta(i) -= step;
  return (trainReward(c, plus) - trainReward(c, minus)) / (2.0 * step);
}

GradCheckReport runGradCheck(const GradCheckOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  GradCheckReport report;
  for (int t = 0; t < opts.trials; ++t) {
    const GradCheckCase c = makeGradCheckCase(opts, t);
    TrainRolloutOptions ro;
    ro.dexp = opts.dexp;
    const TrainRollout res = rolloutTrain(c.scenario, c.params, c.bounds, c.env, ro);

    GradCheckTrial trial;
    trial.index = t;
    trial.num_params = c.params.theta.size();
    trial.reward = res.reward;
    for (Eigen::Index i = 0; i < trial.num_params; ++i) {
      const double analytic = res.gradient(i);
      double rel = 0.0, abs_err = 0.0;
      bool ok = within(analytic, finiteDifference(c, i, opts.step), opts, rel, abs_err);
      for (std::size_t r = 0; !ok && r < opts.refine_steps.size(); ++r) {
        ok = within(analytic, finiteDifference(c, i, opts.refine_steps[r]), opts, rel, abs_err);
        if (ok) ++trial.refined;
      }
      if (!ok) {
        ++trial.failures;
        trial.pass = false;
      }
      if (abs_err > trial.max_abs_err) trial.max_abs_err = abs_err;
      if (abs_err > opts.abs_tol && rel > trial.max_rel_err) {
        trial.max_rel_err = rel;
        trial.worst_coordinate = i;
      }
    }
    report.max_abs_err = std::max(report.max_abs_err, trial.max_abs_err);
    report.max_rel_err = std::max(report.max_rel_err, trial.max_rel_err);
    report.pass = report.pass && trial.pass;
    report.trials.push_back(trial);
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace atpg
