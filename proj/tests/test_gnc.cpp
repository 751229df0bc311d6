#include <gtest/gtest.h>

#include <cmath>

#include "rpgo/gnc.hpp"
#include "rpgo/synth.hpp"
#include "test_util.hpp"

namespace rpgo {
namespace {

TEST(GncWeight, SpotValuesAndBoundaries) {
  EXPECT_EQ(gnc_weight_update(0.0, 0.3, 2.0), 1.0);
  EXPECT_NEAR(gnc_weight_update(1.0, 1.0, 1.0), std::sqrt(2.0) - 1.0, 1e-15);
  for (double mu : {1e-4, 0.1, 1.0, 7.5, 1e3}) {
    for (double c : {0.5, 1.0, 7.8147}) {
      EXPECT_NEAR(gnc_weight_update(mu / (mu + 1) * c, mu, c), 1.0, 1e-12);
      EXPECT_NEAR(gnc_weight_update((mu + 1) / mu * c, mu, c), 0.0, 1e-12);
    }
  }
}

// Lipschitz bound on the middle branch: |dw/dr2| <= sqrt(c mu (mu+1)) / (2 r2^1.5),
// largest at the lower boundary.
TEST(GncWeight, ContinuousAndMonotone) {
  for (double mu : {1e-3, 0.2, 1.0, 4.0, 100.0}) {
    const double c = 3.0;
    const double lo = mu / (mu + 1) * c, hi = (mu + 1) / mu * c;
    const double lipschitz = std::sqrt(c * mu * (mu + 1)) / (2.0 * std::pow(lo, 1.5));
    const int steps = 200000;
    const double top = 1.5 * hi;
    double prev = gnc_weight_update(0.0, mu, c);
    for (int i = 1; i <= steps; ++i) {
      const double w = gnc_weight_update(top * i / steps, mu, c);
      EXPECT_GE(w, 0.0);
      EXPECT_LE(w, 1.0);
      EXPECT_LE(w, prev + 1e-15);
      EXPECT_LE(prev - w, lipschitz * top / steps + 1e-12);
      prev = w;
    }
  }
}

TEST(GncWeight, LargeMuApproachesHardIndicator) {
  const double c = 2.0, mu = 1e6;
  for (double r : {0.0, 0.5, 1.9, 1.999, 2.001, 2.5, 100.0}) {
    EXPECT_NEAR(gnc_weight_update(r, mu, c), r <= c ? 1.0 : 0.0, 1e-2) << r;
  }
}

TEST(GncConfig, ThresholdAndValidation) {
  GncConfig cfg;
  EXPECT_NEAR(cfg.threshold(3), 11.344866730144373, 1e-9);
  EXPECT_NEAR(cfg.threshold(6), 16.811893829770931, 1e-9);
  cfg.barc_sq = 4.0;
  EXPECT_EQ(cfg.threshold(6), 4.0);
  cfg.mu_update_factor = 1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_THROW(chi2_quantile(1.0, 3), ConfigError);
  GncConfig bad;
  bad.confidence = 1.5;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad.barc_sq = 2.0;
  EXPECT_NO_THROW(bad.validate());
}

template <class T>
class GncTest : public ::testing::Test {};
using PoseTypes = ::testing::Types<Pose2, Pose3>;
TYPED_TEST_SUITE(GncTest, PoseTypes);

TYPED_TEST(GncTest, NoLoopsReducesToOptimize) {
  using P = TypeParam;
  SynthConfig cfg;
  cfg.dimension = dimension_of<P>();
  cfg.pose_count = 50;
  cfg.true_loop_count = 0;
  const auto g = generate<P>(cfg).graph();
  const auto gnc = gnc_optimize(g, GncConfig{});
  const auto plain = optimize(g);
  EXPECT_TRUE(gnc.inliers.empty());
  EXPECT_EQ(gnc.result.error_trace, plain.error_trace);
}

TYPED_TEST(GncTest, ConsistentLoopsKeepUnitWeights) {
  using P = TypeParam;
  SynthConfig cfg;
  cfg.dimension = dimension_of<P>();
  cfg.pose_count = 120;
  cfg.true_loop_count = 15;
  cfg.sigma_rot = cfg.sigma_trans = 0.0;
  const auto ds = generate<P>(cfg);
  const auto g = ds.graph();
  const auto gnc = gnc_optimize(g, GncConfig{});
  const auto plain = optimize(g);
  EXPECT_EQ(gnc.inliers.size(), 15u);
  for (double w : gnc.weights) EXPECT_EQ(w, 1.0);
  for (const auto& [k, p] : plain.values) EXPECT_LT(testing::pose_distance(p, gnc.result.values.at(k)), 1e-6);
}

TYPED_TEST(GncTest, RejectsRandomOutliers) {
  using P = TypeParam;
  SynthConfig cfg;
  cfg.dimension = dimension_of<P>();
  cfg.pose_count = 200;
  cfg.true_loop_count = 30;
  cfg.outlier_ratio = 0.3;
  cfg.seed = 3;
  const auto ds = generate<P>(cfg);
  const auto g = ds.graph();
  const auto gnc = gnc_optimize(g, GncConfig{});
  EXPECT_TRUE(gnc.graduated);
  const std::size_t offset = g.factors().size() - ds.loops.size();
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < ds.loops.size(); ++i) {
    const bool accepted = gnc.weights[offset + i] > kInlierWeightCutoff;
    wrong += accepted != *ds.loops[i].inlier;
  }
  EXPECT_LE(wrong, 1u);
  for (std::size_t i = 0; i < offset; ++i) EXPECT_EQ(gnc.weights[i], 1.0);
}

}  // namespace
}  // namespace rpgo
