#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "atpg/policy.hpp"
#include "test_util.hpp"

namespace atpg {
namespace {

using Belief = TargetBelief<double>;

std::vector<Belief> randomPriors(std::mt19937_64& rng, int n) {
  std::vector<Belief> priors;
  for (int j = 0; j < n; ++j) priors.push_back({test::uniformVec(rng, 2, -1.5, 1.5), test::randomSpd(rng, 2, 0.2)});
  return priors;
}

Pose<double> randomPlanarPose(std::mt19937_64& rng) {
  return planarPose(test::uniform(rng, -1, 1), test::uniform(rng, -1, 1), test::uniform(rng, -2, 2));
}

class PolicyTest : public ::testing::Test {
protected:
  PolicyLayout layout = PolicyLayout::make(2, 8, PolicyWidths{});
  PolicyParams params = PolicyParams::initialize(layout, 4.0, 11);
  ControlBounds bounds;
};

TEST(Vech, RowMajorUpperTriangle) {
  Eigen::Matrix3d P;
  P << 1, 2, 3, 2, 4, 5, 3, 5, 6;
  EXPECT_EQ(vech(P), (Eigen::VectorXd(6) << 1, 2, 3, 4, 5, 6).finished());
  for (int n = 1; n < 6; ++n) {
    int k = 0;
    for (int r = 0; r < n; ++r)
      for (int c = r; c < n; ++c) EXPECT_EQ(vechIndex(n, r, c), k++);
  }
}

TEST(Layout, ParameterCountForDefaultWidths) {
  const PolicyLayout layout = PolicyLayout::make(2, 8, PolicyWidths{});
  // (6*32+32) + (32*32+32) + (5*64+64) + (64*32+32) + (64*64+64) + (64*2+2)
  EXPECT_EQ(layout.num_params, 8034);
  EXPECT_EQ(layout.inputDim(), 6 + 8 * 5);
  EXPECT_EQ(PolicyLayout::make(2, 3, PolicyWidths{}).num_params, 8034);
  EXPECT_THROW(PolicyLayout::make(1, 8, PolicyWidths{}), std::invalid_argument);
  EXPECT_THROW(layout.layer("nope"), std::out_of_range);
}

TEST(Layout, OffsetsTileTheParameterVector) {
  const PolicyLayout layout = PolicyLayout::make(3, 4, PolicyWidths{5, 7, 9, 11});
  Eigen::Index next = 0;
  for (const auto& l : layout.layers) {
    EXPECT_EQ(l.weight_offset, next);
    EXPECT_EQ(l.bias_offset, l.weight_offset + Eigen::Index(l.in) * l.out);
    next = l.bias_offset + l.out;
  }
  EXPECT_EQ(next, layout.num_params);
}

TEST(Initialize, GlorotRangeAndZeroBiases) {
  const PolicyLayout layout = PolicyLayout::make(2, 8, PolicyWidths{});
  const PolicyParams p = PolicyParams::initialize(layout, 4.0, 3);
  for (const auto& l : layout.layers) {
    const double limit = std::sqrt(6.0 / (l.in + l.out));
    EXPECT_LE(p.theta.segment(l.weight_offset, Eigen::Index(l.in) * l.out).cwiseAbs().maxCoeff(), limit);
    EXPECT_TRUE(p.theta.segment(l.bias_offset, l.out).isZero(0.0));
  }
  EXPECT_EQ(p.theta, PolicyParams::initialize(layout, 4.0, 3).theta);
  EXPECT_NE(p.theta, PolicyParams::initialize(layout, 4.0, 4).theta);
  EXPECT_THROW(PolicyParams::initialize(layout, 0.0, 3), std::invalid_argument);
}

TEST(BuildInput, PaddingMaskAndErrors) {
  std::mt19937_64 rng(1);
  const auto priors = randomPriors(rng, 3);
  const PolicyInput in = buildInput(planarPose(1.0, 2.0, 0.3), priors, 8);
  EXPECT_EQ(in.num_targets, 3);
  EXPECT_EQ(in.mask, (Eigen::VectorXd(8) << 1, 1, 1, 0, 0, 0, 0, 0).finished());
  EXPECT_TRUE(in.target_means.bottomRows(5).isZero(0.0));
  EXPECT_TRUE(in.target_infos.bottomRows(5).isZero(0.0));
  EXPECT_EQ(in.target_infos.row(1).transpose(), vech(priors[1].info));
  EXPECT_TRUE(expmap(in.pose_log, 1.0).isApprox(planarPose(1.0, 2.0, 0.3), 1e-12));
  EXPECT_EQ(in.flatten().size(), 6 + 8 * 5);
  EXPECT_THROW(buildInput(Pose<double>::Identity(), randomPriors(rng, 9), 8), TooManyTargets);
  EXPECT_THROW(buildInput(Pose<double>::Identity(), std::vector<Belief>{}, 8), std::invalid_argument);
}

TEST_F(PolicyTest, ControlsStayWithinBoundsAndPlanar) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> count(1, 8);
  for (int i = 0; i < 2000; ++i) {
    // Widely scaled inputs push the squashing into saturation.
    auto priors = randomPriors(rng, count(rng));
    const double scale = std::pow(10.0, test::uniform(rng, -2, 4));
    for (auto& p : priors) p.mean *= scale;
    const Pose<double> T = planarPose(test::uniform(rng, -1, 1) * scale, test::uniform(rng, -1, 1) * scale, test::uniform(rng, -3, 3));
    const Twist<double> u = forward(buildInput(T, priors, 8), params, bounds).u;
    ASSERT_GE(u(0), bounds.v_min);
    ASSERT_LE(u(0), bounds.v_max);
    ASSERT_GE(u(5), bounds.omega_min);
    ASSERT_LE(u(5), bounds.omega_max);
    ASSERT_EQ(u(1), 0.0);
    ASSERT_EQ(u(2), 0.0);
    ASSERT_EQ(u(3), 0.0);
    ASSERT_EQ(u(4), 0.0);
  }
}

TEST_F(PolicyTest, PermutationInvariance) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 500; ++i) {
    auto priors = randomPriors(rng, 2 + i % 7);
    const Pose<double> T = randomPlanarPose(rng);
    const Twist<double> u = forward(buildInput(T, priors, 8), params, bounds).u;
    std::shuffle(priors.begin(), priors.end(), rng);
    const Twist<double> v = forward(buildInput(T, priors, 8), params, bounds).u;
    ASSERT_LT((u - v).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST_F(PolicyTest, PaddingInvariance) {
  std::mt19937_64 rng(4);
  PolicyParams wide = params;
  wide.layout = PolicyLayout::make(2, 16, PolicyWidths{});
  for (int i = 0; i < 500; ++i) {
    const auto priors = randomPriors(rng, 1 + i % 8);
    const Pose<double> T = randomPlanarPose(rng);
    PolicyInput in = buildInput(T, priors, 8);
    const Twist<double> u = forward(in, params, bounds).u;
    const Twist<double> v = forward(buildInput(T, priors, 16), wide, bounds).u;
    ASSERT_LT((u - v).cwiseAbs().maxCoeff(), 1e-12);
    // Padded slot contents are irrelevant.
    const int pad = 8 - in.num_targets;
    if (pad > 0) {
      in.target_means.bottomRows(pad).setConstant(1e3);
      in.target_infos.bottomRows(pad).setConstant(-7.0);
      ASSERT_LT((forward(in, params, bounds).u - u).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST_F(PolicyTest, SingleTargetGetsAllAttention) {
  std::mt19937_64 rng(5);
  const auto out = forward(buildInput(randomPlanarPose(rng), randomPriors(rng, 1), 8), params, bounds);
  EXPECT_EQ(out.cache.attention(0), 1.0);
  EXPECT_EQ(out.cache.attention.tail(7).cwiseAbs().maxCoeff(), 0.0) << out.cache.attention.transpose();
  EXPECT_NEAR(forward(buildInput(randomPlanarPose(rng), randomPriors(rng, 5), 8), params, bounds).cache.attention.sum(), 1.0,
              1e-15);
}

// Small weights keep the squashing away from saturation so FD is informative.
PolicyParams shrunk(const PolicyParams& p, double s) {
  PolicyParams q = p;
  q.theta *= s;
  return q;
}

TEST_F(PolicyTest, ParameterJacobianMatchesFiniteDifferences) {
  std::mt19937_64 rng(6);
  const PolicyParams p = shrunk(params, 0.6);
  const auto priors = randomPriors(rng, 4);
  const PolicyInput in = buildInput(randomPlanarPose(rng), priors, 8);
  const auto out = forward(in, p, bounds);
  const Eigen::MatrixXd J = jacobians(out.cache, p).params;
  ASSERT_GT(J.cwiseAbs().maxCoeff(), 1e-3);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < p.theta.size(); i += 7) {
    PolicyParams plus = p, minus = p;
    plus.theta(i) += h;
    minus.theta(i) -= h;
    const Twist<double> fd = (forward(in, plus, bounds).u - forward(in, minus, bounds).u) / (2 * h);
    ASSERT_LT((fd - J.col(i)).cwiseAbs().maxCoeff(), 1e-6 * (1.0 + J.col(i).cwiseAbs().maxCoeff())) << "param " << i;
  }
}

TEST_F(PolicyTest, InputJacobianMatchesFiniteDifferences) {
  std::mt19937_64 rng(7);
  const PolicyParams p = shrunk(params, 0.6);
  const PolicyInput in = buildInput(randomPlanarPose(rng), randomPriors(rng, 5), 8);
  const auto out = forward(in, p, bounds);
  const Eigen::MatrixXd J = jacobians(out.cache, p).input;
  const Eigen::VectorXd s = in.flatten();
  const int feat = layout.targetFeatureDim();
  const double h = 1e-6;
  auto perturbed = [&](Eigen::Index i, double delta) {
    PolicyInput q = in;
    if (i < 6) {
      q.pose_log(i) += delta;
    } else {
      const Eigen::Index j = (i - 6) / feat, f = (i - 6) % feat;
      if (f < 2) q.target_means(j, f) += delta;
      else q.target_infos(j, f - 2) += delta;
    }
    return forward(q, p, bounds).u;
  };
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const Twist<double> fd = (perturbed(i, h) - perturbed(i, -h)) / (2 * h);
    ASSERT_LT((fd - J.col(i)).cwiseAbs().maxCoeff(), 1e-6 * (1.0 + J.col(i).cwiseAbs().maxCoeff())) << "input " << i;
  }
  // Padded slots have no influence.
  EXPECT_TRUE(J.rightCols(3 * feat).isZero(0.0));
}

TEST_F(PolicyTest, StaleCacheIsRejected) {
  std::mt19937_64 rng(8);
  const auto out = forward(buildInput(randomPlanarPose(rng), randomPriors(rng, 3), 8), params, bounds);
  PolicyParams changed = params;
  changed.theta(0) += 1e-9;
  EXPECT_THROW(jacobians(out.cache, changed), StaleCache);
  EXPECT_NO_THROW(jacobians(out.cache, params));
}

TEST_F(PolicyTest, ShapeMismatchesAreRejected) {
  std::mt19937_64 rng(9);
  const PolicyInput in = buildInput(randomPlanarPose(rng), randomPriors(rng, 3), 4);
  EXPECT_THROW(forward(in, params, bounds), std::invalid_argument);
  PolicyParams bad = params;
  bad.theta.conservativeResize(10);
  EXPECT_THROW(forward(buildInput(randomPlanarPose(rng), randomPriors(rng, 3), 8), bad, bounds), std::invalid_argument);
}

TEST(ControlBounds, Validation) {
  EXPECT_THROW((ControlBounds{1.0, 1.0, -1.0, 1.0}.validate()), std::invalid_argument);
  EXPECT_THROW((ControlBounds{0.0, 1.0, 1.0, -1.0}.validate()), std::invalid_argument);
  EXPECT_NO_THROW(ControlBounds{}.validate());
}

}  // namespace
}  // namespace atpg
