#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "rpgo/odometry_fusion.hpp"
#include "rpgo/synth.hpp"
#include "test_util.hpp"

namespace rpgo {
namespace {

using testing::pose_distance;
using testing::random_pose3;
using testing::random_tangent;

TEST(SampleAt, ExactInterpolatedAndExtrapolated) {
  const std::vector<OdometrySample<Pose3>> s{{0.0, Pose3()}, {1.0, Pose3(Rotation3(), Vector3(1, 0, 0))}};
  const ExternalOdomConfig<Pose3> cfg;
  EXPECT_EQ(sample_at<Pose3>(s, 1.0, cfg), s[1].pose);
  EXPECT_LT((sample_at<Pose3>(s, 0.5, cfg).translation() - Vector3(0.5, 0, 0)).norm(), 1e-15);
  EXPECT_EQ(sample_at<Pose3>(s, 1.04, cfg), s[1].pose);
  EXPECT_EQ(sample_at<Pose3>(s, -0.05, cfg), s[0].pose);
  EXPECT_THROW(sample_at<Pose3>(s, 1.06, cfg), OutOfRange);

  const std::vector<OdometrySample<Pose3>> yaw{{0.0, Pose3()}, {2.0, Pose3(Rotation3::yaw(std::numbers::pi / 2), Vector3::Zero())}};
  const Pose3 q = sample_at<Pose3>(yaw, 0.5, cfg);
  const Rotation3 expected = Rotation3::from_quaternion(std::cos(std::numbers::pi / 16), 0, 0, std::sin(std::numbers::pi / 16));
  EXPECT_LT((q.rotation().matrix() - expected.matrix()).norm(), 1e-14);

  EXPECT_THROW(sample_at<Pose3>(std::vector<OdometrySample<Pose3>>{}, 0.0, cfg), InvalidArgument);
  const std::vector<OdometrySample<Pose3>> bad{{0.0, Pose3()}, {0.0, Pose3()}};
  EXPECT_THROW(sample_at<Pose3>(bad, 0.0, cfg), InvalidStream);
}

TEST(MakeBetweenFactors, ZeroResidualAtTruthAndEdgeCases) {
  std::mt19937_64 rng(1);
  std::vector<OdometrySample<Pose3>> stream;
  std::vector<double> kf;
  Values<Pose3> truth;
  Pose3 cur = random_pose3(rng);
  for (int k = 0; k < 10; ++k) {
    stream.push_back({0.2 * k, cur});
    kf.push_back(0.2 * k);
    truth[k] = cur;
    cur = cur * Pose3::exp(random_tangent<Pose3>(rng, 0.3, 0.5));
  }
  const ExternalOdomConfig<Pose3> cfg;
  const auto f = make_between_factors(stream, kf, cfg);
  ASSERT_EQ(f.size(), 9u);
  for (const auto& x : f) {
    EXPECT_EQ(x.kind, FactorKind::ExternalOdometry);
    EXPECT_LT(residual(x, truth).norm(), 1e-12);
    EXPECT_EQ(x.noise.information(), cfg.information);
  }
  EXPECT_TRUE(make_between_factors(stream, std::vector<double>{0.2}, cfg).empty());
  EXPECT_THROW(make_between_factors(stream, std::vector<double>{0.0, 5.0}, cfg), OutOfRange);
  const auto shifted = make_between_factors(stream, kf, cfg, 100);
  EXPECT_EQ(shifted.front().key1, 100u);
  EXPECT_EQ(shifted.back().key2, 109u);
}

TEST(MakeBetweenFactors, NoisyStreamMatchesCompositionOracle) {
  SynthConfig sc;
  sc.dimension = Dimension::SE3;
  sc.pose_count = 100;
  sc.true_loop_count = 0;
  sc.external_odometry = true;
  sc.external_sigma_rot = 0.02;
  sc.external_sigma_trans = 0.1;
  const auto ds = generate<Pose3>(sc);
  ExternalOdomConfig<Pose3> cfg;
  const auto f = make_between_factors(ds.external, ds.timestamps, cfg);
  Pose3 chained;
  for (std::size_t k = 0; k < f.size(); ++k) {
    const Eigen::Matrix4d oracle = ds.external[k].pose.matrix().inverse() * ds.external[k + 1].pose.matrix();
    EXPECT_LT((f[k].measurement.matrix() - oracle).cwiseAbs().maxCoeff(), 1e-12);
    chained = chained * f[k].measurement;
  }
  EXPECT_LT(pose_distance(chained, ds.external.front().pose.between(ds.external.back().pose)), 1e-10);
}

TEST(MakeBetweenFactors, GaugeInvariantAndAlignment) {
  std::mt19937_64 rng(2);
  std::vector<OdometrySample<Pose3>> s, moved;
  const Pose3 T = random_pose3(rng, 10.0);
  Pose3 cur;
  for (int k = 0; k < 8; ++k) {
    s.push_back({0.1 * k, cur});
    moved.push_back({0.1 * k, T * cur});
    cur = cur * Pose3::exp(random_tangent<Pose3>(rng, 0.2, 0.3));
  }
  const std::vector<double> kf{0.0, 0.15, 0.3, 0.7};
  ExternalOdomConfig<Pose3> cfg;
  const auto a = make_between_factors(s, kf, cfg), b = make_between_factors(moved, kf, cfg);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_LT(pose_distance(a[i].measurement, b[i].measurement), 1e-12);

  cfg.frame_alignment = random_pose3(rng);
  const auto c = make_between_factors(s, kf, cfg);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Pose3 oracle = cfg.frame_alignment.inverse() * a[i].measurement * cfg.frame_alignment;
    EXPECT_LT(pose_distance(c[i].measurement, oracle), 1e-12);
  }
}

TEST(MakeBetweenFactors, PlanarStream) {
  const std::vector<OdometrySample<Pose2>> s{{0.0, Pose2()}, {1.0, Pose2(1, 0, 0.5)}, {2.0, Pose2(2, 1, 1.0)}};
  const auto f = make_between_factors(s, std::vector<double>{0.0, 1.0, 2.0}, ExternalOdomConfig<Pose2>{});
  ASSERT_EQ(f.size(), 2u);
  EXPECT_LT(pose_distance(f[1].measurement, s[1].pose.between(s[2].pose)), 1e-15);
  ExternalOdomConfig<Pose2> bad;
  bad.max_extrapolation = -1.0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

}  // namespace
}  // namespace rpgo
