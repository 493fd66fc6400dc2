#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "atpg/belief.hpp"
#include "atpg/liegroup.hpp"

namespace atpg {

class TooManyTargets : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

class StaleCache : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

/// Velocity limits enforced by the output squashing.
struct ControlBounds {
  double v_min = 0.0;
  double v_max = 4.0;
  double omega_min = -M_PI / 3.0;
  double omega_max = M_PI / 3.0;

  void validate() const {
    if (!(v_min < v_max)) throw std::invalid_argument("control bounds: v_min must be below v_max");
    if (!(omega_min < omega_max)) throw std::invalid_argument("control bounds: omega_min must be below omega_max");
  }
};

/// Hidden widths of the six fully connected layers. The pose embedding and
/// the target embedding must have equal width for the attention score.
struct PolicyWidths {
  int pose_hidden = 32;     // AP_FC1
  int embedding = 32;       // AP_FC2 and LI_FC2
  int target_hidden = 64;   // LI_FC1
  int output_hidden = 64;   // Out_FC1
};

struct LayerShape {
  std::string name;
  int in = 0;
  int out = 0;
  Eigen::Index weight_offset = 0;  // row-major out x in block
  Eigen::Index bias_offset = 0;
};

struct PolicyLayout {
  int state_dim = 2;        // n_y
  int max_targets = 8;      // n_l_max
  PolicyWidths widths;
  std::vector<LayerShape> layers;  // AP_FC1, AP_FC2, LI_FC1, LI_FC2, Out_FC1, Out_FC2
  Eigen::Index num_params = 0;

  static PolicyLayout make(int state_dim, int max_targets, const PolicyWidths& widths);

  int vechDim() const { return state_dim * (state_dim + 1) / 2; }
  int targetFeatureDim() const { return state_dim + vechDim(); }
  /// Length of the flattened policy input [pose_log, (mean_j, vech_j)_j].
  int inputDim() const { return 6 + max_targets * targetFeatureDim(); }
  const LayerShape& layer(const std::string& name) const;
};

struct PolicyParams {
  PolicyLayout layout;
  Eigen::VectorXd theta;
  double alpha = 4.0;

  /// Glorot-uniform weights, zero biases.
  static PolicyParams initialize(const PolicyLayout& layout, double alpha, std::uint64_t seed);
  std::uint64_t fingerprint() const;
};

struct PolicyInput {
  Twist<double> pose_log = Twist<double>::Zero();
  Eigen::MatrixXd target_means;  // max_targets x n_y, zero padded
  Eigen::MatrixXd target_infos;  // max_targets x vech, zero padded
  Eigen::VectorXd mask;          // leading ones for real targets
  int num_targets = 0;

  Eigen::VectorXd flatten() const;
};

/// Upper triangle, row-major.
Eigen::VectorXd vech(const Eigen::MatrixXd& P);

/// Index of entry (r, c), r <= c, within vech of an n x n matrix.
int vechIndex(int n, int r, int c);

PolicyInput buildInput(const Pose<double>& T, std::span<const TargetBelief<double>> priors, int max_targets);

/// Activations retained by forward() for the Jacobian passes.
struct PolicyCache {
  std::uint64_t fingerprint = 0;
  ControlBounds bounds;
  Eigen::VectorXd pose_in, z1, h1, z2, emb_agent;
  Eigen::MatrixXd target_in, g1, l1, g2, emb_targets;  // one row per padded slot
  Eigen::VectorXd attention, context, joint, o1, r1, raw;
  Eigen::Vector2d squash_slope;  // d control / d raw
};

struct PolicyOutput {
  Twist<double> u;
  PolicyCache cache;
};

PolicyOutput forward(const PolicyInput& input, const PolicyParams& params, const ControlBounds& bounds);

/// d u / d theta (6 x n_p) and d u / d input (6 x inputDim) at the cached
/// point. Rows 1..4 (lateral, vertical velocity, roll and pitch rates) are zero.
struct PolicyJacobians {
  Eigen::MatrixXd params;
  Eigen::MatrixXd input;
};

PolicyJacobians jacobians(const PolicyCache& cache, const PolicyParams& params);

inline Eigen::MatrixXd paramJacobian(const PolicyCache& cache, const PolicyParams& params) {
  return jacobians(cache, params).params;
}

/// Planar twist index driven by each of the two network outputs.
inline constexpr int kForwardSpeedIndex = 0;
inline constexpr int kYawRateIndex = 5;

}  // namespace atpg
