#include <cmath>
#include <random>

#include <gtest/gtest.h>
#include <unsupported/Eigen/MatrixFunctions>

#include "atpg/liegroup.hpp"
#include "test_util.hpp"

namespace atpg {
namespace {

using test::randomTwist;

// Reference exponential by Pade scaling-and-squaring on the 4x4 algebra element.
Pose<double> referenceExp(const Twist<double>& u, double tau) {
  const Eigen::Matrix4d m = tau * hat(u);
  return m.exp();
}

TEST(Hat, ZeroAndUnitTranslation) {
  EXPECT_TRUE(hat(Twist<double>::Zero()).isZero(0.0));
  Twist<double> u = Twist<double>::Zero();
  u(0) = 1.0;
  Eigen::Matrix4d expected = Eigen::Matrix4d::Zero();
  expected(0, 3) = 1.0;
  EXPECT_EQ(hat(u), expected);
}

TEST(Hat, RotationBlockIsSkewAndVeeInverts) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    const Twist<double> u = test::uniformVec(rng, 6, -3, 3);
    const Eigen::Matrix4d m = hat(u);
    EXPECT_TRUE((m.topLeftCorner(3, 3) + m.topLeftCorner(3, 3).transpose()).isZero(0.0));
    EXPECT_TRUE(m.row(3).isZero(0.0));
    EXPECT_EQ(m.topRightCorner(3, 1), u.head<3>());
    EXPECT_TRUE(vee(m).isApprox(u, 0.0));
  }
}

TEST(Expmap, ClosedFormExamples) {
  EXPECT_TRUE(expmap(Twist<double>::Zero(), 1.0).isIdentity(0.0));

  Twist<double> v = Twist<double>::Zero();
  v(0) = 1.0;
  Pose<double> T = expmap(v, 1.0);
  EXPECT_TRUE(T.topLeftCorner(3, 3).isIdentity(0.0));
  EXPECT_NEAR(T(0, 3), 1.0, 1e-15);
  EXPECT_NEAR(T(1, 3), 0.0, 1e-15);

  Twist<double> w = Twist<double>::Zero();
  w(5) = M_PI / 2;
  T = expmap(w, 1.0);
  Eigen::Matrix3d Rz;
  Rz << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  EXPECT_TRUE(T.topLeftCorner(3, 3).isApprox(Rz, 1e-15));
  EXPECT_LT(T.topRightCorner(3, 1).norm(), 1e-15);
}

TEST(Expmap, MatchesMatrixExponential) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 500; ++i) {
    const Twist<double> u = randomTwist(rng, 5.0, 3.0);
    const double tau = test::uniform(rng, 0.05, 1.0);
    EXPECT_LT((expmap(u, tau) - referenceExp(u, tau)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Expmap, SmallAngleBranchMatchesMatrixExponential) {
  std::mt19937_64 rng(3);
  for (double scale : {1e-4, 1e-7, 1e-9, 1e-12, 0.0}) {
    const Twist<double> u = randomTwist(rng, 2.0, 1.0);
    Twist<double> small = u;
    small.tail<3>() *= scale;
    EXPECT_LT((expmap(small, 0.5) - referenceExp(small, 0.5)).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Expmap, OneParameterSubgroup) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 1000; ++i) {
    const Twist<double> u = randomTwist(rng, 5.0, 3.0);
    const double t1 = test::uniform(rng, 0.0, 1.0);
    const double t2 = test::uniform(rng, 0.0, 1.0);
    EXPECT_LT((expmap(u, t1) * expmap(u, t2) - expmap(u, t1 + t2)).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Logmap, IdentityAndFixedExample) {
  EXPECT_TRUE(logmap(Pose<double>::Identity()).isZero(0.0));
  Twist<double> u;
  u << 0.3, -0.1, 0, 0, 0, 0.7;
  EXPECT_LT((logmap(expmap(u, 1.0)) - u).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Logmap, RoundTripOverRandomTwists) {
  std::mt19937_64 rng(5);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Twist<double> u = randomTwist(rng, 5.0, 3.0);
    worst = std::max(worst, (logmap(expmap(u, 1.0)) - u).cwiseAbs().maxCoeff());
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(Logmap, ThrowsNearPi) {
  Twist<double> u = Twist<double>::Zero();
  u(3) = M_PI - 1e-8;
  EXPECT_THROW(logmap(expmap(u, 1.0)), AngleNearPi);
  u(3) = M_PI;
  EXPECT_THROW(logmap(expmap(u, 1.0)), AngleNearPi);
  u(3) = M_PI - 1e-4;
  EXPECT_NO_THROW(logmap(expmap(u, 1.0)));
}

TEST(Logmap, NearestBranchNearPiExponentiatesBack) {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 50; ++i) {
    Twist<double> u = randomTwist(rng, 2.0, 1.0);
    u.tail<3>() = u.tail<3>().normalized() * (M_PI - test::uniform(rng, 0.0, 1e-7));
    const Pose<double> T = expmap(u, 1.0);
    const Twist<double> xi = logmapNearest(T);
    EXPECT_LT((expmap(xi, 1.0) - T).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(RightJacobian, LinearizesExponential) {
  // exp(xi + d) ~= exp(xi) exp(J_r(xi) d)
  std::mt19937_64 rng(7);
  const double h = 1e-6;
  for (int i = 0; i < 200; ++i) {
    const Twist<double> xi = randomTwist(rng, 3.0, 2.5);
    const Mat6<double> Jr = se3RightJacobian(xi);
    for (int j = 0; j < 6; ++j) {
      Twist<double> d = Twist<double>::Zero();
      d(j) = h;
      const Pose<double> lhs = inverse(referenceExp(xi, 1.0)) * referenceExp(xi + d, 1.0);
      const Twist<double> fd = vee(lhs - Pose<double>::Identity()) / h;
      EXPECT_LT((fd - Jr.col(j)).cwiseAbs().maxCoeff(), 1e-5);
    }
  }
}

TEST(LeftJacobian, InverseIsInverse) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector3d phi = randomTwist(rng, 0.0, 3.0).tail<3>();
    EXPECT_TRUE((so3LeftJacobian(phi) * so3LeftJacobianInverse(phi)).isIdentity(1e-10));
  }
}

TEST(DexpDu, AtZeroIsScaledGenerator) {
  for (int j = 0; j < 6; ++j) {
    Twist<double> e = Twist<double>::Zero();
    e(j) = 1.0;
    EXPECT_TRUE(dexpDu(Twist<double>::Zero(), 0.7, j).isApprox(0.7 * hat(e), 1e-15));
    EXPECT_TRUE(dexpDu(Twist<double>::Zero(), 1.4, j).isApprox(2.0 * dexpDu(Twist<double>::Zero(), 0.7, j), 1e-15));
  }
}

TEST(DexpDu, MatchesCentralDifferences) {
  std::mt19937_64 rng(9);
  const double h = 1e-6;
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    Twist<double> u = test::uniformVec(rng, 6, -1, 1);
    u *= test::uniform(rng, 0.0, 5.0) / u.norm();
    const double tau = test::uniform(rng, 0.1, 1.0);
    for (int j = 0; j < 6; ++j) {
      Twist<double> e = Twist<double>::Zero();
      e(j) = h;
      const Pose<double> fd = (referenceExp(u + e, tau) - referenceExp(u - e, tau)) / (2 * h);
      worst = std::max(worst, (fd - dexpDu(u, tau, j)).cwiseAbs().maxCoeff());
    }
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(Compose, InvariantsHoldOverLongChains) {
  std::mt19937_64 rng(10);
  Pose<double> T = Pose<double>::Identity();
  for (int k = 0; k < 10000; ++k) {
    T = compose(T, expmap(randomTwist(rng, 4.0, 1.0), 0.5));
    ASSERT_LT(orthonormalityError(T), 1e-9);
    ASSERT_NEAR(T.topLeftCorner(3, 3).determinant(), 1.0, 1e-9);
    ASSERT_EQ(T.row(3), Eigen::RowVector4d(0, 0, 0, 1));
  }
}

TEST(Orthonormalize, ProjectsPerturbedRotation) {
  std::mt19937_64 rng(11);
  Pose<double> T = expmap(randomTwist(rng, 1.0, 2.0), 1.0);
  T.topLeftCorner(3, 3) += 1e-6 * test::uniformVec(rng, 9, -1, 1).reshaped(3, 3);
  ASSERT_GT(orthonormalityError(T), 1e-9);
  orthonormalize(T);
  EXPECT_TRUE(isValidPose(T, 1e-12));
}

TEST(PlanarPose, IsPlanarExponential) {
  Twist<double> u = Twist<double>::Zero();
  u(0) = 1.0;
  u(5) = 0.4;
  const Pose<double> T = expmap(u, 0.5);
  const double heading = std::atan2(T(1, 0), T(0, 0));
  EXPECT_NEAR(heading, 0.2, 1e-15);
  EXPECT_TRUE(planarPose(T(0, 3), T(1, 3), heading).isApprox(T, 1e-15));
  EXPECT_EQ(T(2, 3), 0.0);
}

TEST(Inverse, ComposesToIdentity) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 100; ++i) {
    const Pose<double> T = expmap(randomTwist(rng, 5.0, 3.0), 1.0);
    EXPECT_TRUE((inverse(T) * T).isIdentity(1e-12));
  }
}

}  // namespace
}  // namespace atpg
