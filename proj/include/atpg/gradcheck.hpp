#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "atpg/gradient.hpp"
#include "atpg/policy.hpp"
#include "atpg/sim.hpp"

namespace atpg {

struct GradCheckOptions {
  int trials = 20;
  int horizon = 5;
  int targets = 2;
  int max_targets = 4;
  std::uint64_t seed = 0;
  double step = 1e-5;
  double rel_tol = 1e-4;
  double abs_tol = 1e-7;
  /// Extra, smaller steps tried for a coordinate whose central difference at
  /// `step` straddles a ReLU or distance-field kink.
  std::vector<double> refine_steps = {1e-6, 1e-7};
  PolicyWidths widths{4, 4, 8, 8};  // 222 parameters for planar targets
  DexpFunction dexp;                // fault injection for negative controls
};

struct GradCheckTrial {
  int index = 0;
  Eigen::Index num_params = 0;
  double reward = 0.0;
  double max_abs_err = 0.0;
  double max_rel_err = 0.0;  // over coordinates that are not under the absolute floor
  Eigen::Index worst_coordinate = -1;
  int refined = 0;           // coordinates that needed a smaller step
  int failures = 0;
  bool pass = true;
};

struct GradCheckReport {
  std::vector<GradCheckTrial> trials;
  double max_abs_err = 0.0;
  double max_rel_err = 0.0;
  double seconds = 0.0;
  bool pass = true;
};

/// Builds the scenario and policy used by one gradient-check trial.
struct GradCheckCase {
  Scenario scenario;
  PolicyParams params;
  ControlBounds bounds;
  EnvConfig env;
};

GradCheckCase makeGradCheckCase(const GradCheckOptions& opts, int trial);

/// Central finite difference of the train-mode reward along coordinate i.
double finiteDifference(const GradCheckCase& c, Eigen::Index i, double step);

GradCheckReport runGradCheck(const GradCheckOptions& opts);

}  // namespace atpg
