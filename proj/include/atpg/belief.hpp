#pragma once

#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "atpg/fov.hpp"
#include "atpg/liegroup.hpp"

namespace atpg {

template <typename Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

class SingularInfo : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class SingularInnovation : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Gaussian target belief in information form. The same type holds the
/// prior (p, P) and the posterior (mu, Y).
template <typename Scalar>
struct TargetBelief {
  VecX<Scalar> mean;
  MatX<Scalar> info;
};

/// y' = A y + B xi + w,  w ~ N(0, W);   z = H y + eta,  eta ~ N(0, V).
template <typename Scalar>
struct TargetModel {
  MatX<Scalar> A, B, W, H, V;

  int stateDim() const { return static_cast<int>(A.rows()); }
  int measurementDim() const { return static_cast<int>(H.rows()); }

  /// H^T V^-1 H
  MatX<Scalar> measurementInfo() const {
    const MatX<Scalar> Vinv_H = V.llt().solve(H);
    const MatX<Scalar> J = H.transpose() * Vinv_H;
    return (J + J.transpose()) / Scalar(2);
  }

  /// Planar random-walk targets observed by position: A = B = H = I,
  /// W = motion_std^2 I, V = sensor_std^2 I.
  static TargetModel planar(Scalar sensor_std, Scalar motion_std) {
    TargetModel m;
    m.A = MatX<Scalar>::Identity(2, 2);
    m.B = MatX<Scalar>::Identity(2, 2);
    m.H = MatX<Scalar>::Identity(2, 2);
    m.W = motion_std * motion_std * MatX<Scalar>::Identity(2, 2);
    m.V = sensor_std * sensor_std * MatX<Scalar>::Identity(2, 2);
    return m;
  }
};

namespace belief {

inline constexpr double kInfoFloor = 1e-12;

/// Symmetrizes and lifts the spectrum above the floor.
template <typename Scalar>
void condition(MatX<Scalar>& Y) {
  Y = (Y + Y.transpose()).eval() / Scalar(2);
  Eigen::SelfAdjointEigenSolver<MatX<Scalar>> eig(Y, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < Scalar(kInfoFloor))
    Y.diagonal().array() += Scalar(kInfoFloor);
}

template <typename Scalar>
bool isValid(const TargetBelief<Scalar>& b, double sym_tol = 1e-10) {
  if ((b.info - b.info.transpose()).norm() >= sym_tol) return false;
  Eigen::SelfAdjointEigenSolver<MatX<Scalar>> eig(b.info, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff() > Scalar(kInfoFloor);
}

template <typename Scalar>
Eigen::LLT<MatX<Scalar>> factorInfo(const MatX<Scalar>& Y) {
  Eigen::LLT<MatX<Scalar>> llt(Y);
  if (llt.info() != Eigen::Success) throw SingularInfo("information matrix is not positive definite");
  return llt;
}

/// Prior from posterior: p = A mu + B xi, P = (A Y^-1 A^T + W)^-1.
template <typename Scalar>
TargetBelief<Scalar> predict(const TargetBelief<Scalar>& post, const VecX<Scalar>& xi, const TargetModel<Scalar>& m) {
  const auto llt = factorInfo(post.info);
  const MatX<Scalar> cov = m.A * llt.solve(MatX<Scalar>(m.A.transpose())) + m.W;
  Eigen::LLT<MatX<Scalar>> cov_llt(cov);
  if (cov_llt.info() != Eigen::Success) throw SingularInfo("predicted covariance is not positive definite");
  TargetBelief<Scalar> prior;
  prior.mean = m.A * post.mean + m.B * xi;
  prior.info = cov_llt.solve(MatX<Scalar>::Identity(cov.rows(), cov.cols()));
  condition(prior.info);
  return prior;
}

/// Information weight 1 - Phi(d) of a target at world location zeta(p).
template <typename Scalar>
Scalar visibilityWeight(const Pose<Scalar>& T, const VecX<Scalar>& p, const FovShape& shape, const ProbitParams& probit_params) {
  const SignedDistance<Scalar> sd = signedDistance(bodyFrame(T, zeta(p)), shape);
  return probitComplement(sd.value, probit_params);
}

/// M(T, p) = (1 - Phi(d(q(T, p)))) H^T V^-1 H
template <typename Scalar>
MatX<Scalar> infoGain(const Pose<Scalar>& T, const VecX<Scalar>& p, const TargetModel<Scalar>& m, const FovShape& shape,
                      const ProbitParams& probit_params) {
  return visibilityWeight(T, p, shape, probit_params) * m.measurementInfo();
}

/// Measurement-free posterior: Y = P + M, mean kept.
template <typename Scalar>
TargetBelief<Scalar> smoothUpdate(const TargetBelief<Scalar>& prior, const MatX<Scalar>& gain) {
  TargetBelief<Scalar> post{prior.mean, prior.info + gain};
  condition(post.info);
  return post;
}

template <typename Scalar>
TargetBelief<Scalar> smoothUpdate(const TargetBelief<Scalar>& prior, const Pose<Scalar>& T, const TargetModel<Scalar>& m,
                                  const FovShape& shape, const ProbitParams& probit_params) {
  return smoothUpdate(prior, infoGain(T, prior.mean, m, shape, probit_params));
}

/// Covariance-form Kalman gain P^-1 H^T (H P^-1 H^T + V)^-1.
template <typename Scalar>
MatX<Scalar> kalmanGain(const TargetBelief<Scalar>& prior, const TargetModel<Scalar>& m) {
  const auto llt = factorInfo(prior.info);
  const MatX<Scalar> cov_Ht = llt.solve(MatX<Scalar>(m.H.transpose()));
  const MatX<Scalar> S = m.H * cov_Ht + m.V;
  Eigen::LLT<MatX<Scalar>> s_llt(S);
  if (s_llt.info() != Eigen::Success) throw SingularInnovation("innovation covariance is not positive definite");
  return s_llt.solve(MatX<Scalar>(cov_Ht.transpose())).transpose();
}

/// Information-form gain Y^-1 H^T V^-1 with Y = P + H^T V^-1 H.
template <typename Scalar>
MatX<Scalar> kalmanGainInformationForm(const TargetBelief<Scalar>& prior, const TargetModel<Scalar>& m) {
  const MatX<Scalar> Y = prior.info + m.measurementInfo();
  const MatX<Scalar> Ht_Vinv = m.V.llt().solve(m.H).transpose();
  return factorInfo(Y).solve(Ht_Vinv);
}

/// Kalman measurement update for a target observed inside the FoV.
template <typename Scalar>
TargetBelief<Scalar> hardUpdate(const TargetBelief<Scalar>& prior, const VecX<Scalar>& z, const TargetModel<Scalar>& m) {
  const MatX<Scalar> K = kalmanGain(prior, m);
  TargetBelief<Scalar> post;
  post.mean = prior.mean + K * (z - m.H * prior.mean);
  post.info = prior.info + m.measurementInfo();
  condition(post.info);
  return post;
}

template <typename Scalar>
Scalar logDet(const MatX<Scalar>& Y) {
  const auto llt = factorInfo(Y);
  return Scalar(2) * llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace belief
}  // namespace atpg
