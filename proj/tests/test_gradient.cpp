#include <cmath>
#include <random>
#include <vector>

#include <Eigen/LU>
#include <gtest/gtest.h>

#include "atpg/gradient.hpp"
#include "test_util.hpp"

namespace atpg {
namespace {

using Belief = TargetBelief<double>;

Eigen::MatrixXd symmetric(std::mt19937_64& rng, int n) {
  const Eigen::MatrixXd a = test::uniformVec(rng, n * n, -1, 1).reshaped(n, n);
  return a + a.transpose();
}

Eigen::VectorXd vec(const Eigen::MatrixXd& m) { return m.reshaped(); }

TEST(Kron, MatchesDefinition) {
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd a = test::uniformVec(rng, 6, -1, 1).reshaped(2, 3);
  const Eigen::MatrixXd b = test::uniformVec(rng, 4, -1, 1).reshaped(4, 1);
  const Eigen::MatrixXd k = gradient::kron(a, b);
  ASSERT_EQ(k.rows(), 8);
  ASSERT_EQ(k.cols(), 3);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j)
      for (int r = 0; r < 4; ++r) EXPECT_EQ(k(i * 4 + r, j), a(i, j) * b(r, 0));
  // vec(F X G^T) = (G kron F) vec(X)
  const Eigen::MatrixXd F = test::uniformVec(rng, 9, -1, 1).reshaped(3, 3);
  const Eigen::MatrixXd G = test::uniformVec(rng, 9, -1, 1).reshaped(3, 3);
  const Eigen::MatrixXd X = test::uniformVec(rng, 9, -1, 1).reshaped(3, 3);
  EXPECT_TRUE((gradient::kron(G, F) * vec(X)).isApprox(vec(F * X * G.transpose()), 1e-14));
}

TEST(PriorInfoSensitivity, EqualsInverseBasedFormForInvertibleA) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 2 + trial % 3;
    TargetModel<double> m;
    m.A = test::uniformVec(rng, n * n, -1, 1).reshaped(n, n) + 1.5 * Eigen::MatrixXd::Identity(n, n);
    m.B = Eigen::MatrixXd::Identity(n, n);
    m.W = test::randomSpd(rng, n, 0.05);
    m.H = m.B;
    m.V = m.B;
    Belief post{Eigen::VectorXd::Zero(n), test::randomSpd(rng, n, 0.3)};
    const Belief prior = belief::predict(post, Eigen::VectorXd(Eigen::VectorXd::Zero(n)), m);
    const Eigen::MatrixXd Om = symmetric(rng, n);

    const Eigen::MatrixXd Ainv = m.A.inverse();
    const Eigen::MatrixXd left = (m.A.transpose() + post.info * Ainv * m.W).inverse();
    const Eigen::MatrixXd right = (m.A + m.W * Ainv.transpose() * post.info).inverse();
    const Eigen::MatrixXd oracle = left * Om * right;

    const Eigen::MatrixXd got = gradient::priorInfoSensitivity(vec(Om), post, prior, m).reshaped(n, n);
    ASSERT_LT((got - oracle).cwiseAbs().maxCoeff(), 1e-10 * std::max(1.0, oracle.cwiseAbs().maxCoeff()));
  }
}

TEST(PriorInfoSensitivity, MatchesFiniteDifferenceOfPredict) {
  std::mt19937_64 rng(3);
  const TargetModel<double> m = TargetModel<double>::planar(0.2, 0.05);
  for (int trial = 0; trial < 100; ++trial) {
    const Belief post{Eigen::Vector2d::Zero(), test::randomSpd(rng, 2, 0.3)};
    const Belief prior = belief::predict(post, Eigen::VectorXd(Eigen::Vector2d::Zero()), m);
    const Eigen::MatrixXd Om = symmetric(rng, 2);
    const double h = 1e-6;
    const Eigen::VectorXd xi = Eigen::Vector2d::Zero();
    const Eigen::MatrixXd fd =
        (belief::predict(Belief{post.mean, post.info + h * Om}, xi, m).info -
         belief::predict(Belief{post.mean, post.info - h * Om}, xi, m).info) / (2 * h);
    const Eigen::MatrixXd got = gradient::priorInfoSensitivity(vec(Om), post, prior, m).reshaped(2, 2);
    ASSERT_LT((got - fd).cwiseAbs().maxCoeff(), 1e-7);
  }
}

TEST(PriorInfoSensitivity, SingularAIsAllowed) {
  TargetModel<double> m = TargetModel<double>::planar(0.2, 0.05);
  m.A(1, 1) = 0.0;
  const Belief post{Eigen::Vector2d::Zero(), Eigen::Matrix2d::Identity()};
  const Belief prior = belief::predict(post, Eigen::VectorXd(Eigen::Vector2d::Zero()), m);
  const Eigen::MatrixXd got = gradient::priorInfoSensitivity(vec(Eigen::Matrix2d::Identity()), post, prior, m);
  EXPECT_TRUE(got.allFinite());
  EXPECT_EQ(got(3), 0.0);
}

// T_K(theta) for u_k = u0_k + M_k theta.
Pose<double> rollPose(const Pose<double>& T0, const std::vector<Twist<double>>& u0,
                      const std::vector<Eigen::MatrixXd>& M, const Eigen::VectorXd& theta, double tau) {
  Pose<double> T = T0;
  for (size_t k = 0; k < u0.size(); ++k) T = compose(T, expmap(Twist<double>(u0[k] + M[k] * theta), tau));
  return T;
}

TEST(StepLambda, MatchesFiniteDifferenceOfPose) {
  std::mt19937_64 rng(4);
  const int np = 3, K = 12;
  const double tau = 0.5;
  for (int trial = 0; trial < 50; ++trial) {
    const Pose<double> T0 = expmap(test::randomTwist(rng, 2, 2), 1.0);
    std::vector<Twist<double>> u0;
    std::vector<Eigen::MatrixXd> M;
    for (int k = 0; k < K; ++k) {
      u0.push_back(test::randomTwist(rng, 2, 1));
      M.push_back(test::uniformVec(rng, 6 * np, -1, 1).reshaped(6, np));
    }
    const Eigen::VectorXd theta = Eigen::VectorXd::Zero(np);
    PerturbationState s = PerturbationState::zero(1, 2, np);
    Pose<double> T = T0;
    for (int k = 0; k < K; ++k) {
      gradient::stepLambda(s, T, u0[k], M[k], tau);
      T = compose(T, expmap(u0[k], tau));
    }
    const double h = 1e-6;
    for (int i = 0; i < np; ++i) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(np);
      e(i) = h;
      const Pose<double> fd = (rollPose(T0, u0, M, theta + e, tau) - rollPose(T0, u0, M, theta - e, tau)) / (2 * h);
      ASSERT_LT((fd - s.lambdaAt(i)).cwiseAbs().maxCoeff(), 1e-6) << "trial " << trial << " param " << i;
    }
  }
}

TEST(StepLambda, ZeroPolicyJacobianKeepsZero) {
  std::mt19937_64 rng(5);
  PerturbationState s = PerturbationState::zero(2, 2, 7);
  Pose<double> T = Pose<double>::Identity();
  for (int k = 0; k < 20; ++k) {
    const Twist<double> u = test::randomTwist(rng, 3, 1);
    gradient::stepLambda(s, T, u, Eigen::MatrixXd::Zero(6, 7), 0.5);
    T = compose(T, expmap(u, 0.5));
  }
  EXPECT_TRUE(s.lambda.isZero(0.0));
}

TEST(StepLambda, UsesTheSuppliedDexp) {
  std::mt19937_64 rng(6);
  const Twist<double> u = test::randomTwist(rng, 2, 1);
  const Eigen::MatrixXd J = test::uniformVec(rng, 12, -1, 1).reshaped(6, 2);
  PerturbationState a = PerturbationState::zero(1, 2, 2), b = a;
  gradient::stepLambda(a, Pose<double>::Identity(), u, J, 0.5);
  gradient::stepLambda(b, Pose<double>::Identity(), u, J, 0.5,
                       [](const Twist<double>& v, double tau, int j) { return Pose<double>(2.0 * dexpDu(v, tau, j)); });
  EXPECT_TRUE(b.lambda.isApprox(2.0 * a.lambda, 1e-14));
}

TEST(StepOmega, MatchesFiniteDifferenceAlongPosePerturbation) {
  std::mt19937_64 rng(7);
  const TargetModel<double> m = TargetModel<double>::planar(0.2, 0.05);
  const FovShape shape;
  const ProbitParams probit;
  int nontrivial = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const Pose<double> T = planarPose(test::uniform(rng, -1, 1), test::uniform(rng, -1, 1), test::uniform(rng, -1, 1));
    const Belief prior{test::uniformVec(rng, 2, -1, 3), test::randomSpd(rng, 2, 0.5)};
    Twist<double> xi = Twist<double>::Zero();
    xi(0) = test::uniform(rng, -1, 1);
    xi(1) = test::uniform(rng, -1, 1);
    xi(5) = test::uniform(rng, -1, 1);
    PerturbationState s = PerturbationState::zero(1, 2, 1);
    s.lambda.col(0) = (T * hat(xi)).reshaped();
    const Eigen::MatrixXd dP = Eigen::MatrixXd::Zero(4, 1);
    gradient::stepOmega(s, 0, dP, prior, T, m, shape, probit);

    const double h = 1e-6;
    auto Y = [&](double eps) { return belief::smoothUpdate(prior, Pose<double>(compose(T, expmap(xi, eps))), m, shape, probit).info; };
    const Eigen::MatrixXd fd = (Y(h) - Y(-h)) / (2 * h);
    const Eigen::MatrixXd got = s.omegaAt(0, 0);
    // Skip stencils that straddle a distance-field kink.
    const Eigen::MatrixXd fwd = (Y(h) - Y(0)) / h;
    if ((fwd - fd).cwiseAbs().maxCoeff() > 1e-4 * (1 + fd.cwiseAbs().maxCoeff())) continue;
    if (fd.cwiseAbs().maxCoeff() > 1e-3) ++nontrivial;
    ASSERT_LT((got - fd).cwiseAbs().maxCoeff(), 1e-6 * (1 + fd.cwiseAbs().maxCoeff())) << "trial " << trial;
    ASSERT_LT((got - got.transpose()).cwiseAbs().maxCoeff(), 1e-8);
  }
  EXPECT_GT(nontrivial, 50);
}

TEST(StepOmega, PosteriorOverloadAddsPredictionTerm) {
  std::mt19937_64 rng(8);
  const TargetModel<double> m = TargetModel<double>::planar(0.2, 0.05);
  const Belief post{Eigen::Vector2d(1, 0), test::randomSpd(rng, 2, 0.5)};
  const Belief prior = belief::predict(post, Eigen::VectorXd(Eigen::Vector2d::Zero()), m);
  PerturbationState a = PerturbationState::zero(1, 2, 3);
  for (int i = 0; i < 3; ++i) a.omega[0].col(i) = vec(symmetric(rng, 2));
  a.lambda = test::uniformVec(rng, 48, -1, 1).reshaped(16, 3);
  PerturbationState b = a;
  const Pose<double> T = planarPose(0.0, 0.0, 0.1);
  gradient::stepOmega(a, 0, post, prior, T, m, FovShape{}, ProbitParams{});
  gradient::stepOmega(b, 0, gradient::priorInfoSensitivity(b.omega[0], post, prior, m), prior, T, m, FovShape{},
                      ProbitParams{});
  EXPECT_TRUE(a.omega[0].isApprox(b.omega[0], 1e-14));
}

TEST(RewardGradient, IdentityInformationGivesTrace) {
  std::mt19937_64 rng(9);
  const int np = 5;
  PerturbationState s = PerturbationState::zero(3, 2, np);
  Eigen::VectorXd expected = Eigen::VectorXd::Zero(np);
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < np; ++i) {
      const Eigen::MatrixXd Om = symmetric(rng, 2);
      s.omega[j].col(i) = vec(Om);
      expected(i) += Om.trace();
    }
  const std::vector<Belief> finals(3, Belief{Eigen::Vector2d::Zero(), Eigen::Matrix2d::Identity()});
  EXPECT_TRUE(gradient::rewardGradient(finals, s).isApprox(expected, 1e-14));
}

TEST(RewardGradient, MatchesFiniteDifferenceOfLogDet) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::MatrixXd Y = test::randomSpd(rng, 2, 0.3);
    const Eigen::MatrixXd Om = symmetric(rng, 2);
    PerturbationState s = PerturbationState::zero(1, 2, 1);
    s.omega[0].col(0) = vec(Om);
    const std::vector<Belief> finals{Belief{Eigen::Vector2d::Zero(), Y}};
    const double h = 1e-6;
    const double fd = (belief::logDet(Eigen::MatrixXd(Y + h * Om)) - belief::logDet(Eigen::MatrixXd(Y - h * Om))) / (2 * h);
    ASSERT_NEAR(gradient::rewardGradient(finals, s)(0), fd, 1e-6);
  }
}

TEST(RewardGradient, ZeroSensitivitiesGiveZero) {
  const PerturbationState s = PerturbationState::zero(2, 2, 4);
  const std::vector<Belief> finals(2, Belief{Eigen::Vector2d::Zero(), 3.0 * Eigen::Matrix2d::Identity()});
  EXPECT_TRUE(gradient::rewardGradient(finals, s).isZero(0.0));
}

TEST(FeedbackJacobian, EqualsDenseProduct) {
  std::mt19937_64 rng(11);
  const PolicyLayout layout = PolicyLayout::make(2, 4, PolicyWidths{3, 3, 3, 3});
  const int np = 9;
  PerturbationState s = PerturbationState::zero(3, 2, np);
  s.lambda = test::uniformVec(rng, 16 * np, -1, 1).reshaped(16, np);
  std::vector<Eigen::MatrixXd> dP;
  for (int j = 0; j < 3; ++j) dP.push_back(test::uniformVec(rng, 4 * np, -1, 1).reshaped(4, np));
  const Pose<double> T = expmap(test::randomTwist(rng, 2, 2), 1.0);
  const Eigen::MatrixXd Jin = test::uniformVec(rng, 6 * layout.inputDim(), -1, 1).reshaped(6, layout.inputDim());
  const Eigen::MatrixXd dense = Jin * gradient::inputSensitivity(s, T, dP, layout);
  EXPECT_TRUE(gradient::feedbackJacobian(Jin, s, T, dP, layout).isApprox(dense, 1e-12));
}

TEST(InputSensitivity, PoseRowsMatchFiniteDifferenceOfLog) {
  std::mt19937_64 rng(12);
  const PolicyLayout layout = PolicyLayout::make(2, 2, PolicyWidths{3, 3, 3, 3});
  for (int trial = 0; trial < 100; ++trial) {
    const Pose<double> T = expmap(test::randomTwist(rng, 2, 2.5), 1.0);
    const Twist<double> xi = test::randomTwist(rng, 1, 1);
    PerturbationState s = PerturbationState::zero(1, 2, 1);
    s.lambda.col(0) = (T * hat(xi)).reshaped();
    const std::vector<Eigen::MatrixXd> dP{Eigen::MatrixXd::Zero(4, 1)};
    const Eigen::MatrixXd ds = gradient::inputSensitivity(s, T, dP, layout);
    const double h = 1e-6;
    const Twist<double> fd =
        (logmapNearest(Pose<double>(compose(T, expmap(xi, h)))) - logmapNearest(Pose<double>(compose(T, expmap(xi, -h))))) /
        (2 * h);
    ASSERT_LT((ds.col(0).head(6) - fd).cwiseAbs().maxCoeff(), 1e-6);
    ASSERT_TRUE(ds.col(0).tail(ds.rows() - 6).isZero(0.0));
  }
}

}  // namespace
}  // namespace atpg
