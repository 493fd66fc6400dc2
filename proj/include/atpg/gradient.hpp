#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "atpg/belief.hpp"
#include "atpg/fov.hpp"
#include "atpg/liegroup.hpp"
#include "atpg/policy.hpp"

namespace atpg {

class SingularPosterior : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Derivative of exp(tau u^) with respect to the j-th twist coordinate.
using DexpFunction = std::function<Pose<double>(const Twist<double>&, double, int)>;

/// Sensitivities of the rollout state to every policy parameter.
///
/// Column i of `lambda` is vec(dT_k / dtheta_i) (column-major 4x4). For
/// target j, column i of `omega[j]` is vec(dY_k^(j) / dtheta_i).
struct PerturbationState {
  Eigen::Matrix<double, 16, Eigen::Dynamic> lambda;
  std::vector<Eigen::MatrixXd> omega;
  int state_dim = 0;

  static PerturbationState zero(int num_targets, int state_dim, Eigen::Index num_params);

  Eigen::Index numParams() const { return lambda.cols(); }
  Pose<double> lambdaAt(Eigen::Index i) const;
  Eigen::MatrixXd omegaAt(int j, Eigen::Index i) const;
};

namespace gradient {

/// Kronecker product of small dense matrices.
Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// dP_{k+1} for every parameter, as the (n_y^2 x n_p) family
///   P_{k+1} A Y_k^-1 Omega_k Y_k^-1 A^T P_{k+1}.
/// This is the derivative of the prediction step written without A^-1.
Eigen::MatrixXd priorInfoSensitivity(const Eigen::MatrixXd& omega, const TargetBelief<double>& posterior,
                                     const TargetBelief<double>& prior, const TargetModel<double>& model);

/// d s_k / d theta for the flattened policy input (inputDim x n_p).
/// Pose rows use d log(T) = J_r^-1(log T) vee(T^-1 dT); mean rows are zero;
/// information rows are vech of the prior information sensitivities.
Eigen::MatrixXd inputSensitivity(const PerturbationState& state, const Pose<double>& T,
                                 std::span<const Eigen::MatrixXd> prior_sensitivities, const PolicyLayout& layout);

/// input_jacobian * inputSensitivity(...) without forming the dense
/// (inputDim x n_p) sensitivity; rows of zero sensitivity are skipped.
Eigen::MatrixXd feedbackJacobian(const Eigen::MatrixXd& input_jacobian, const PerturbationState& state,
                                 const Pose<double>& T, std::span<const Eigen::MatrixXd> prior_sensitivities,
                                 const PolicyLayout& layout);

/// Lambda_{k+1} = Lambda_k exp(tau u) + T_k sum_j J[j, i] dexp/du_j.
void stepLambda(PerturbationState& state, const Pose<double>& T, const Twist<double>& u,
                const Eigen::MatrixXd& policy_jacobian, double tau, const DexpFunction& dexp = {});

/// Omega_{k+1}^(j) = dP_{k+1} + s H^T V^-1 H with
///   s = Phi'(d) dd/dq . (Q T^-1 Lambda_{k+1} T^-1 [zeta(p); 1]).
/// Uses the already advanced lambda in `state`.
void stepOmega(PerturbationState& state, int target, const TargetBelief<double>& posterior,
               const TargetBelief<double>& prior, const Pose<double>& T_next, const TargetModel<double>& model,
               const FovShape& shape, const ProbitParams& probit_params);

/// Same as stepOmega with the first term precomputed by priorInfoSensitivity.
void stepOmega(PerturbationState& state, int target, const Eigen::MatrixXd& prior_sensitivity,
               const TargetBelief<double>& prior, const Pose<double>& T_next, const TargetModel<double>& model,
               const FovShape& shape, const ProbitParams& probit_params);

/// d/dtheta sum_j log det Y_K^(j) = sum_j tr(Y_K^-1 Omega_K^(j,i)).
Eigen::VectorXd rewardGradient(std::span<const TargetBelief<double>> finals, const PerturbationState& state);

}  // namespace gradient
}  // namespace atpg
