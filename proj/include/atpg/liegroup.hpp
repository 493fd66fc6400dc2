#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Core>
#include <Eigen/LU>
#include <Eigen/SVD>

namespace atpg {

/// Homogeneous SE(3) transform [R x; 0 1].
template <typename Scalar>
using Pose = Eigen::Matrix<Scalar, 4, 4>;

/// Twist coordinates [v; w] (linear velocity first).
template <typename Scalar>
using Twist = Eigen::Matrix<Scalar, 6, 1>;

template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;

template <typename Scalar>
using Mat3 = Eigen::Matrix<Scalar, 3, 3>;

template <typename Scalar>
using Mat6 = Eigen::Matrix<Scalar, 6, 6>;

class AngleNearPi : public std::domain_error {
public:
  explicit AngleNearPi(double angle)
      : std::domain_error("logmap: rotation angle within 1e-6 of pi"), angle_(angle) {}
  double angle() const { return angle_; }

private:
  double angle_;
};

namespace lie {

/// Below this rotation angle the closed forms switch to truncated series.
inline constexpr double kSmallAngle = 1e-8;
/// Orthonormality drift that triggers projection back onto SO(3).
inline constexpr double kOrthoTolerance = 1e-9;
inline constexpr double kPiMargin = 1e-6;

// Coefficient functions of theta. The closed forms cancel badly for small
// angles, so each switches to its Taylor expansion where that is more accurate.

/// sin(t)/t
template <typename Scalar>
Scalar sinc(Scalar t) {
  using std::sin;
  if (std::abs(t) < Scalar(1e-4)) return Scalar(1) - t * t / Scalar(6);
  return sin(t) / t;
}

/// (1 - cos t)/t^2
template <typename Scalar>
Scalar cosc(Scalar t) {
  using std::sin;
  if (std::abs(t) < Scalar(1e-4)) return Scalar(0.5) - t * t / Scalar(24);
  const Scalar h = sin(t / 2) / t;
  return Scalar(2) * h * h;
}

/// (t - sin t)/t^3
template <typename Scalar>
Scalar sinc3(Scalar t) {
  using std::sin;
  const Scalar t2 = t * t;
  if (std::abs(t) < Scalar(1e-2)) return Scalar(1) / 6 - t2 / 120 + t2 * t2 / 5040;
  return (t - sin(t)) / (t2 * t);
}

/// (t^2 + 2 cos t - 2)/(2 t^4)
template <typename Scalar>
Scalar cosc4(Scalar t) {
  using std::cos;
  const Scalar t2 = t * t;
  if (std::abs(t) < Scalar(1e-2)) return Scalar(1) / 24 - t2 / 720 + t2 * t2 / 40320;
  return (t2 + 2 * cos(t) - 2) / (2 * t2 * t2);
}

/// (2t - 3 sin t + t cos t)/(2 t^5)
template <typename Scalar>
Scalar sinc5(Scalar t) {
  using std::cos;
  using std::sin;
  const Scalar t2 = t * t;
  if (std::abs(t) < Scalar(1e-2)) return Scalar(1) / 120 - t2 / 2520 + t2 * t2 / 120960;
  return (2 * t - 3 * sin(t) + t * cos(t)) / (2 * t2 * t2 * t);
}

}  // namespace lie

template <typename Derived>
Mat3<typename Derived::Scalar> skew(const Eigen::MatrixBase<Derived>& w) {
  using Scalar = typename Derived::Scalar;
  Mat3<Scalar> m;
  m << Scalar(0), -w(2), w(1),
       w(2), Scalar(0), -w(0),
       -w(1), w(0), Scalar(0);
  return m;
}

/// Axial vector of the skew part of a 3x3 matrix.
template <typename Derived>
Vec3<typename Derived::Scalar> unskew(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  return Vec3<Scalar>(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1)) / Scalar(2);
}

template <typename Derived>
Pose<typename Derived::Scalar> hat(const Eigen::MatrixBase<Derived>& u) {
  using Scalar = typename Derived::Scalar;
  Pose<Scalar> m = Pose<Scalar>::Zero();
  m.template topLeftCorner<3, 3>() = skew(u.template tail<3>());
  m.template topRightCorner<3, 1>() = u.template head<3>();
  return m;
}

/// Inverse of hat; the rotation part is read from the skew component.
template <typename Derived>
Twist<typename Derived::Scalar> vee(const Eigen::MatrixBase<Derived>& m) {
  Twist<typename Derived::Scalar> u;
  u.template head<3>() = m.template topRightCorner<3, 1>();
  u.template tail<3>() = unskew(m.template topLeftCorner<3, 3>());
  return u;
}

/// Rodrigues rotation exp(phi^).
template <typename Derived>
Mat3<typename Derived::Scalar> so3Exp(const Eigen::MatrixBase<Derived>& phi) {
  using Scalar = typename Derived::Scalar;
  const Scalar theta = phi.norm();
  const Mat3<Scalar> K = skew(phi);
  if (theta < Scalar(lie::kSmallAngle)) return Mat3<Scalar>::Identity() + K + K * K / Scalar(2);
  return Mat3<Scalar>::Identity() + lie::sinc(theta) * K + lie::cosc(theta) * K * K;
}

/// SO(3) left Jacobian J_l(phi); the right Jacobian is J_l(-phi).
template <typename Derived>
Mat3<typename Derived::Scalar> so3LeftJacobian(const Eigen::MatrixBase<Derived>& phi) {
  using Scalar = typename Derived::Scalar;
  const Scalar theta = phi.norm();
  const Mat3<Scalar> K = skew(phi);
  if (theta < Scalar(lie::kSmallAngle)) return Mat3<Scalar>::Identity() + K / Scalar(2) + K * K / Scalar(6);
  return Mat3<Scalar>::Identity() + lie::cosc(theta) * K + lie::sinc3(theta) * K * K;
}

template <typename Derived>
Mat3<typename Derived::Scalar> so3LeftJacobianInverse(const Eigen::MatrixBase<Derived>& phi) {
  using Scalar = typename Derived::Scalar;
  using std::cos;
  using std::sin;
  const Scalar theta = phi.norm();
  const Mat3<Scalar> K = skew(phi);
  Scalar c;
  if (theta < Scalar(1e-4)) {
    c = Scalar(1) / 12 + theta * theta / 720;
  } else {
    c = (Scalar(1) - theta * sin(theta) / (Scalar(2) * (Scalar(1) - cos(theta)))) / (theta * theta);
  }
  return Mat3<Scalar>::Identity() - K / Scalar(2) + c * K * K;
}

/// Coupling block of the SE(3) left Jacobian for xi = [rho; phi].
template <typename Scalar>
Mat3<Scalar> se3LeftJacobianCoupling(const Vec3<Scalar>& rho, const Vec3<Scalar>& phi) {
  const Scalar theta = phi.norm();
  const Mat3<Scalar> P = skew(phi);
  const Mat3<Scalar> R = skew(rho);
  const Mat3<Scalar> PR = P * R;
  const Mat3<Scalar> RP = R * P;
  const Mat3<Scalar> PRP = PR * P;
  return R / Scalar(2)
      + lie::sinc3(theta) * (PR + RP + PRP)
      + lie::cosc4(theta) * (P * PR + RP * P - Scalar(3) * PRP)
      + lie::sinc5(theta) * (PRP * P + P * PRP);
}

/// SE(3) left Jacobian, twist ordering [v; w].
template <typename Derived>
Mat6<typename Derived::Scalar> se3LeftJacobian(const Eigen::MatrixBase<Derived>& xi) {
  using Scalar = typename Derived::Scalar;
  const Vec3<Scalar> rho = xi.template head<3>();
  const Vec3<Scalar> phi = xi.template tail<3>();
  Mat6<Scalar> J = Mat6<Scalar>::Zero();
  const Mat3<Scalar> Jl = so3LeftJacobian(phi);
  J.template topLeftCorner<3, 3>() = Jl;
  J.template bottomRightCorner<3, 3>() = Jl;
  J.template topRightCorner<3, 3>() = se3LeftJacobianCoupling<Scalar>(rho, phi);
  return J;
}

template <typename Derived>
Mat6<typename Derived::Scalar> se3RightJacobian(const Eigen::MatrixBase<Derived>& xi) {
  return se3LeftJacobian(Twist<typename Derived::Scalar>(-xi));
}

/// exp(tau * u^) in closed form.
template <typename Derived>
Pose<typename Derived::Scalar> expmap(const Eigen::MatrixBase<Derived>& u, typename Derived::Scalar tau) {
  using Scalar = typename Derived::Scalar;
  const Vec3<Scalar> rho = tau * u.template head<3>();
  const Vec3<Scalar> phi = tau * u.template tail<3>();
  Pose<Scalar> T = Pose<Scalar>::Identity();
  T.template topLeftCorner<3, 3>() = so3Exp(phi);
  T.template topRightCorner<3, 1>() = so3LeftJacobian(phi) * rho;
  return T;
}

/// Rotation angle of R in [0, pi], computed without acos cancellation.
template <typename Derived>
typename Derived::Scalar rotationAngle(const Eigen::MatrixBase<Derived>& R) {
  using Scalar = typename Derived::Scalar;
  using std::atan2;
  const Scalar s = unskew(R).norm();
  const Scalar c = (R.trace() - Scalar(1)) / Scalar(2);
  return atan2(s, c);
}

/// log(T)^vee. Throws AngleNearPi when the rotation is within 1e-6 of pi.
template <typename Derived>
Twist<typename Derived::Scalar> logmap(const Eigen::MatrixBase<Derived>& T) {
  using Scalar = typename Derived::Scalar;
  const Mat3<Scalar> R = T.template topLeftCorner<3, 3>();
  const Scalar theta = rotationAngle(R);
  if (theta > Scalar(M_PI - lie::kPiMargin)) throw AngleNearPi(static_cast<double>(theta));
  Vec3<Scalar> phi = unskew(R);
  if (theta >= Scalar(lie::kSmallAngle)) phi *= theta / std::sin(theta);
  Twist<Scalar> xi;
  xi.template tail<3>() = phi;
  xi.template head<3>() = so3LeftJacobianInverse(phi) * T.template topRightCorner<3, 1>();
  return xi;
}

/// logmap that resolves the near-pi ambiguity by picking the axis from the
/// symmetric part of R, sign chosen to agree with the residual skew part.
template <typename Derived>
Twist<typename Derived::Scalar> logmapNearest(const Eigen::MatrixBase<Derived>& T) {
  using Scalar = typename Derived::Scalar;
  try {
    return logmap(T);
  } catch (const AngleNearPi&) {
  }
  const Mat3<Scalar> R = T.template topLeftCorner<3, 3>();
  const Scalar theta = rotationAngle(R);
  const Mat3<Scalar> S = (R + R.transpose()) / Scalar(2) + Mat3<Scalar>::Identity();
  Eigen::Index col = 0;
  S.diagonal().maxCoeff(&col);
  Vec3<Scalar> axis = S.col(col).normalized();
  if (axis.dot(unskew(R)) < Scalar(0)) axis = -axis;
  const Vec3<Scalar> phi = theta * axis;
  Twist<Scalar> xi;
  xi.template tail<3>() = phi;
  xi.template head<3>() = so3LeftJacobian(phi).inverse() * T.template topRightCorner<3, 1>();
  return xi;
}

/// d/du_j exp(tau u^) = exp(tau u^) (tau J_r(tau u) e_j)^.
template <typename Derived>
Pose<typename Derived::Scalar> dexpDu(const Eigen::MatrixBase<Derived>& u, typename Derived::Scalar tau, int j) {
  using Scalar = typename Derived::Scalar;
  const Twist<Scalar> xi = tau * u;
  const Twist<Scalar> col = tau * se3RightJacobian(xi).col(j);
  return expmap(u, tau) * hat(col);
}

template <typename Derived>
Pose<typename Derived::Scalar> inverse(const Eigen::MatrixBase<Derived>& T) {
  using Scalar = typename Derived::Scalar;
  Pose<Scalar> inv = Pose<Scalar>::Identity();
  const Mat3<Scalar> Rt = T.template topLeftCorner<3, 3>().transpose();
  inv.template topLeftCorner<3, 3>() = Rt;
  inv.template topRightCorner<3, 1>() = -Rt * T.template topRightCorner<3, 1>();
  return inv;
}

template <typename Derived>
typename Derived::Scalar orthonormalityError(const Eigen::MatrixBase<Derived>& T) {
  using Scalar = typename Derived::Scalar;
  const Mat3<Scalar> R = T.template topLeftCorner<3, 3>();
  return (R.transpose() * R - Mat3<Scalar>::Identity()).norm();
}

/// Nearest rotation (polar factor) to the rotation block; bottom row reset.
template <typename Scalar>
void orthonormalize(Pose<Scalar>& T) {
  Eigen::JacobiSVD<Mat3<Scalar>> svd(T.template topLeftCorner<3, 3>(), Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3<Scalar> U = svd.matrixU();
  const Mat3<Scalar> V = svd.matrixV();
  if ((U * V.transpose()).determinant() < Scalar(0)) U.col(2) = -U.col(2);
  T.template topLeftCorner<3, 3>() = U * V.transpose();
  T.row(3) << Scalar(0), Scalar(0), Scalar(0), Scalar(1);
}

/// a * b, projected back onto SE(3) if the rotation block has drifted.
template <typename Scalar>
Pose<Scalar> compose(const Pose<Scalar>& a, const Pose<Scalar>& b) {
  Pose<Scalar> T = a * b;
  T.row(3) << Scalar(0), Scalar(0), Scalar(0), Scalar(1);
  if (orthonormalityError(T) > Scalar(lie::kOrthoTolerance)) orthonormalize(T);
  return T;
}

/// Planar pose embedded in SE(3): position (x, y), heading about +z.
template <typename Scalar>
Pose<Scalar> planarPose(Scalar x, Scalar y, Scalar heading) {
  Pose<Scalar> T = Pose<Scalar>::Identity();
  const Scalar c = std::cos(heading);
  const Scalar s = std::sin(heading);
  T(0, 0) = c;
  T(0, 1) = -s;
  T(1, 0) = s;
  T(1, 1) = c;
  T(0, 3) = x;
  T(1, 3) = y;
  return T;
}

template <typename Derived>
bool isValidPose(const Eigen::MatrixBase<Derived>& T, double tol = 1e-9) {
  using Scalar = typename Derived::Scalar;
  const Mat3<Scalar> R = T.template topLeftCorner<3, 3>();
  return orthonormalityError(T) < tol && std::abs(R.determinant() - Scalar(1)) < tol &&
         T(3, 0) == Scalar(0) && T(3, 1) == Scalar(0) && T(3, 2) == Scalar(0) && T(3, 3) == Scalar(1);
}

}  // namespace atpg
