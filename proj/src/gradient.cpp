#include "atpg/gradient.hpp"

#include <Eigen/LU>

namespace atpg {
namespace {

using Mat16 = Eigen::Matrix<double, 16, 16>;

constexpr int vecIndex(int r, int c) { return c * 4 + r; }

/// Linear map vec(M) -> vee(M) for M in se(3) (skew part averaged).
Eigen::Matrix<double, 6, 16> veeSelector() {
  Eigen::Matrix<double, 6, 16> S = Eigen::Matrix<double, 6, 16>::Zero();
  for (int r = 0; r < 3; ++r) S(r, vecIndex(r, 3)) = 1.0;
  S(3, vecIndex(2, 1)) = 0.5;
  S(3, vecIndex(1, 2)) = -0.5;
  S(4, vecIndex(0, 2)) = 0.5;
  S(4, vecIndex(2, 0)) = -0.5;
  S(5, vecIndex(1, 0)) = 0.5;
  S(5, vecIndex(0, 1)) = -0.5;
  return S;
}

Eigen::LLT<Eigen::MatrixXd> factorPosterior(const Eigen::MatrixXd& Y) {
  Eigen::LLT<Eigen::MatrixXd> llt(Y);
  if (llt.info() != Eigen::Success) throw SingularPosterior("posterior information is not positive definite");
  return llt;
}

/// d log(T) = J_r^-1(log T) vee(T^-1 dT), as a map on vec(dT).
Eigen::Matrix<double, 6, 16> poseLogMap(const Pose<double>& T) {
  const Mat16 left = gradient::kron(Eigen::Matrix4d::Identity(), inverse(T));
  const Mat6<double> Jr_inv = se3RightJacobian(logmapNearest(T)).inverse();
  return Jr_inv * veeSelector() * left;
}

}  // namespace

PerturbationState PerturbationState::zero(int num_targets, int state_dim, Eigen::Index num_params) {
  PerturbationState s;
  s.state_dim = state_dim;
  s.lambda = Eigen::Matrix<double, 16, Eigen::Dynamic>::Zero(16, num_params);
  s.omega.assign(num_targets, Eigen::MatrixXd::Zero(state_dim * state_dim, num_params));
  return s;
}

Pose<double> PerturbationState::lambdaAt(Eigen::Index i) const {
  return Eigen::Map<const Pose<double>>(lambda.col(i).data());
}

Eigen::MatrixXd PerturbationState::omegaAt(int j, Eigen::Index i) const {
  return Eigen::Map<const Eigen::MatrixXd>(omega[j].col(i).data(), state_dim, state_dim);
}

namespace gradient {

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd k(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r)
    for (Eigen::Index c = 0; c < a.cols(); ++c) k.block(r * b.rows(), c * b.cols(), b.rows(), b.cols()) = a(r, c) * b;
  return k;
}

Eigen::MatrixXd priorInfoSensitivity(const Eigen::MatrixXd& omega, const TargetBelief<double>& posterior,
                                     const TargetBelief<double>& prior, const TargetModel<double>& model) {
  const auto llt = factorPosterior(posterior.info);
  // F = P A Y^-1 ; dP = F dY F^T ; vec(F X F^T) = (F kron F) vec(X)
  const Eigen::MatrixXd F = prior.info * llt.solve(model.A.transpose()).transpose();
  return kron(F, F) * omega;
}

Eigen::MatrixXd inputSensitivity(const PerturbationState& state, const Pose<double>& T,
                                 std::span<const Eigen::MatrixXd> prior_sensitivities, const PolicyLayout& layout) {
  const Eigen::Index np = state.numParams();
  Eigen::MatrixXd ds = Eigen::MatrixXd::Zero(layout.inputDim(), np);

  ds.topRows(6).noalias() = poseLogMap(T) * state.lambda;

  const int n = layout.state_dim;
  const int feat = layout.targetFeatureDim();
  for (std::size_t j = 0; j < prior_sensitivities.size(); ++j) {
    const Eigen::MatrixXd& dP = prior_sensitivities[j];
    const Eigen::Index base = 6 + Eigen::Index(j) * feat + n;
    for (int r = 0; r < n; ++r)
      for (int c = r; c < n; ++c) ds.row(base + vechIndex(n, r, c)) = dP.row(c * n + r);
  }
  return ds;
}

Eigen::MatrixXd feedbackJacobian(const Eigen::MatrixXd& input_jacobian, const PerturbationState& state,
                                 const Pose<double>& T, std::span<const Eigen::MatrixXd> prior_sensitivities,
                                 const PolicyLayout& layout) {
  const Eigen::Matrix<double, 6, 16> pose_rows = input_jacobian.leftCols<6>() * poseLogMap(T);
  Eigen::MatrixXd out = pose_rows * state.lambda;

  const int n = layout.state_dim;
  const int feat = layout.targetFeatureDim();
  // vech(dP) = S vec(dP): fold the selection into the input Jacobian columns.
  Eigen::MatrixXd info_cols(6, n * n);
  for (std::size_t j = 0; j < prior_sensitivities.size(); ++j) {
    info_cols.setZero();
    const Eigen::Index base = 6 + Eigen::Index(j) * feat + n;
    for (int r = 0; r < n; ++r)
      for (int c = r; c < n; ++c) info_cols.col(c * n + r) = input_jacobian.col(base + vechIndex(n, r, c));
    out.noalias() += info_cols * prior_sensitivities[j];
  }
  return out;
}

void stepLambda(PerturbationState& state, const Pose<double>& T, const Twist<double>& u,
                const Eigen::MatrixXd& policy_jacobian, double tau, const DexpFunction& dexp) {
  const Pose<double> E = expmap(u, tau);
  Eigen::Matrix<double, 16, 6> G;
  for (int j = 0; j < 6; ++j) {
    const Pose<double> D = dexp ? dexp(u, tau, j) : dexpDu(u, tau, j);
    const Pose<double> TD = T * D;
    G.col(j) = Eigen::Map<const Eigen::Matrix<double, 16, 1>>(TD.data());
  }
  // Column c of Lambda_i E is sum_r E(r, c) Lambda_i(:, r); rows 4c..4c+3 of vec.
  Eigen::Matrix<double, 16, Eigen::Dynamic> next = G * policy_jacobian;
  for (int c = 0; c < 4; ++c)
    for (int r = 0; r < 4; ++r)
      if (E(r, c) != 0.0) next.middleRows<4>(4 * c) += E(r, c) * state.lambda.middleRows<4>(4 * r);
  state.lambda = std::move(next);
}

void stepOmega(PerturbationState& state, int target, const Eigen::MatrixXd& prior_sensitivity,
               const TargetBelief<double>& prior, const Pose<double>& T_next, const TargetModel<double>& model,
               const FovShape& shape, const ProbitParams& probit_params) {
  const Pose<double> Tinv = inverse(T_next);
  const Eigen::Vector4d w = Tinv * zeta(prior.mean).homogeneous();
  const Vec3<double> q = w.head<3>();
  const SignedDistance<double> sd = signedDistance(q, shape);
  const double slope = probitDeriv(sd.value, probit_params);

  // Lambda_i w = (w^T kron I) vec(Lambda_i)
  Eigen::Matrix<double, 4, 16> apply_w = Eigen::Matrix<double, 4, 16>::Zero();
  for (int c = 0; c < 4; ++c)
    for (int r = 0; r < 4; ++r) apply_w(r, vecIndex(r, c)) = w(c);
  const Eigen::Matrix<double, 1, 16> row = slope * sd.grad.transpose() * Tinv.topRows<3>() * apply_w;
  const Eigen::RowVectorXd s = row * state.lambda;

  const Eigen::MatrixXd J = model.measurementInfo();
  const Eigen::Map<const Eigen::VectorXd> vecJ(J.data(), J.size());
  Eigen::MatrixXd next = prior_sensitivity;
  next.noalias() += vecJ * s;
  state.omega[target] = std::move(next);
}

void stepOmega(PerturbationState& state, int target, const TargetBelief<double>& posterior,
               const TargetBelief<double>& prior, const Pose<double>& T_next, const TargetModel<double>& model,
               const FovShape& shape, const ProbitParams& probit_params) {
  const Eigen::MatrixXd dP = priorInfoSensitivity(state.omega[target], posterior, prior, model);
  stepOmega(state, target, dP, prior, T_next, model, shape, probit_params);
}

Eigen::VectorXd rewardGradient(std::span<const TargetBelief<double>> finals, const PerturbationState& state) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(state.numParams());
  for (std::size_t j = 0; j < finals.size(); ++j) {
    const auto llt = factorPosterior(finals[j].info);
    const Eigen::MatrixXd Yinv = llt.solve(Eigen::MatrixXd::Identity(finals[j].info.rows(), finals[j].info.cols()));
    // tr(Y^-1 Omega) = vec(Y^-T) . vec(Omega)
    const Eigen::MatrixXd YinvT = Yinv.transpose();
    const Eigen::Map<const Eigen::RowVectorXd> weights(YinvT.data(), YinvT.size());
    g.noalias() += (weights * state.omega[j]).transpose();
  }
  return g;
}

}  // namespace gradient
}  // namespace atpg
