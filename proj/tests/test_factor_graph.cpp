#include <gtest/gtest.h>

#include <random>

#include "rpgo/factor_graph.hpp"
#include "test_util.hpp"

namespace rpgo {
namespace {

using testing::random_pose;
using testing::random_tangent;

template <PoseType P>
NoiseModel<P::kDof> random_noise(std::mt19937_64& rng) {
  constexpr int N = P::kDof;
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix<N> A;
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < N; ++j) A(i, j) = n(rng);
  }
  return NoiseModel<N>::from_information(A * A.transpose() + 0.5 * Matrix<N>::Identity());
}

template <class T>
class FactorTest : public ::testing::Test {};
using PoseTypes = ::testing::Types<Pose2, Pose3>;
TYPED_TEST_SUITE(FactorTest, PoseTypes);

TYPED_TEST(FactorTest, ZeroResidualAtTruth) {
  using P = TypeParam;
  std::mt19937_64 rng(1);
  const P a = random_pose<P>(rng), b = random_pose<P>(rng);
  Values<P> v{{0, a}, {1, b}};
  const auto f = Factor<P>::between(FactorKind::Odometry, 0, 1, a.between(b), {});
  EXPECT_LT(residual(f, v).norm(), 1e-12);

  Values<P> same{{0, a}, {1, a}};
  const auto id = Factor<P>::between(FactorKind::LoopClosure, 0, 1, P::identity(), {});
  EXPECT_EQ(residual(id, same), P::Tangent::Zero());
}

TYPED_TEST(FactorTest, SmallPerturbationGivesResidualNearDelta) {
  using P = TypeParam;
  std::mt19937_64 rng(2);
  const P a = random_pose<P>(rng), b = random_pose<P>(rng);
  const auto f = Factor<P>::between(FactorKind::Odometry, 0, 1, a.between(b), {});
  for (double eps : {1e-3, 1e-4, 1e-5}) {
    typename P::Tangent d = random_tangent<P>(rng, 1.0, 1.0);
    d *= eps / d.norm();
    Values<P> v{{0, a}, {1, b * P::exp(d)}};
    EXPECT_LT((residual(f, v) - d).norm(), 10 * eps * eps);
  }
}

TYPED_TEST(FactorTest, MissingKeyThrows) {
  using P = TypeParam;
  Values<P> v{{0, P::identity()}};
  const auto f = Factor<P>::between(FactorKind::Odometry, 0, 7, P::identity(), {});
  EXPECT_THROW(residual(f, v), KeyNotFound);
  EXPECT_THROW(linearize(f, v), KeyNotFound);
}

TYPED_TEST(FactorTest, PriorJacobianAtIdentityIsIdentity) {
  using P = TypeParam;
  Values<P> v{{3, P::identity()}};
  const auto f = Factor<P>::prior(3, P::identity(), {});
  const auto lin = linearize(f, v);
  EXPECT_LT((lin.J1 - P::Jacobian::Identity()).norm(), 1e-15);
  EXPECT_EQ(lin.J2, P::Jacobian::Zero());
}

// Central differences on the whitened residual for every factor kind.
TYPED_TEST(FactorTest, JacobiansMatchFiniteDifferences) {
  using P = TypeParam;
  constexpr int N = P::kDof;
  std::mt19937_64 rng(3);
  const double h = 1e-6;
  for (int trial = 0; trial < 100; ++trial) {
    const P a = random_pose<P>(rng), b = random_pose<P>(rng);
    const P z = a.between(b) * P::exp(random_tangent<P>(rng, 0.5, 0.3));
    const auto noise = random_noise<P>(rng);
    for (FactorKind kind : {FactorKind::Prior, FactorKind::Odometry, FactorKind::LoopClosure,
                            FactorKind::ExternalOdometry}) {
      const auto f = kind == FactorKind::Prior ? Factor<P>::prior(0, a * P::exp(random_tangent<P>(rng, 0.5, 0.3)), noise)
                                               : Factor<P>::between(kind, 0, 1, z, noise);
      Values<P> v{{0, a}, {1, b}};
      const auto lin = linearize(f, v);
      EXPECT_LT((lin.residual - whitened_residual(f, v)).norm(), 1e-15);
      for (Key k : {Key{0}, Key{1}}) {
        if (f.unary() && k == 1) continue;
        Matrix<N> fd;
        for (int i = 0; i < N; ++i) {
          typename P::Tangent d = P::Tangent::Zero();
          d[i] = h;
          Values<P> vp = v, vm = v;
          vp[k] = v[k] * P::exp(d);
          vm[k] = v[k] * P::exp(-d);
          fd.col(i) = (whitened_residual(f, vp) - whitened_residual(f, vm)) / (2 * h);
        }
        const Matrix<N>& J = k == 0 ? lin.J1 : lin.J2;
        EXPECT_LE((J - fd).norm(), 1e-5 * std::max(1.0, fd.norm())) << to_string(kind) << " key " << k;
      }
    }
  }
}

TYPED_TEST(FactorTest, ResidualIsGaugeInvariant) {
  using P = TypeParam;
  std::mt19937_64 rng(4);
  for (int i = 0; i < 50; ++i) {
    const P a = random_pose<P>(rng), b = random_pose<P>(rng), T = random_pose<P>(rng);
    const auto f = Factor<P>::between(FactorKind::LoopClosure, 0, 1, random_pose<P>(rng), {});
    Values<P> v{{0, a}, {1, b}}, w{{0, T * a}, {1, T * b}};
    EXPECT_LT((residual(f, v) - residual(f, w)).norm(), 1e-9);
  }
}

TEST(NoiseModel, WhitenedNormIsMahalanobis) {
  std::mt19937_64 rng(5);
  const auto n = random_noise<Pose3>(rng);
  const Tangent6 r = testing::random_tangent<Pose3>(rng, 1.0, 1.0);
  EXPECT_NEAR(n.whiten(r).squaredNorm(), r.dot(n.information() * r), 1e-10);
  EXPECT_LT((n.sqrt_information().transpose() * n.sqrt_information() - n.information()).norm(), 1e-10);

  // Scaling the information by s scales the whitened norm by s.
  const auto scaled = NoiseModel<6>::from_information(4.0 * n.information());
  EXPECT_NEAR(scaled.whiten(r).squaredNorm(), 4.0 * n.whiten(r).squaredNorm(), 1e-9);
}

TEST(NoiseModel, RejectsInvalidInformation) {
  Matrix3 asym = Matrix3::Identity();
  asym(0, 1) = 1e-3;
  EXPECT_THROW(NoiseModel<3>::from_information(asym), InvalidArgument);
  Matrix3 indefinite = Matrix3::Identity();
  indefinite(2, 2) = -1.0;
  EXPECT_THROW(NoiseModel<3>::from_information(indefinite), InvalidArgument);
  EXPECT_THROW(NoiseModel<3>::from_sigmas(Vector3(1.0, 0.0, 1.0)), InvalidArgument);
  EXPECT_NO_THROW(NoiseModel<3>::from_sigmas(Vector3(0.1, 0.2, 0.3)));
}

TEST(Factor, BetweenRejectsPriorKind) {
  EXPECT_THROW(Factor<Pose2>::between(FactorKind::Prior, 0, 1, Pose2(), {}), InvalidArgument);
}

TEST(PoseGraph, ValidatesKeysAndAdjacency) {
  PoseGraph<Pose2> g;
  g.add_variable(0, Pose2());
  g.add_variable(1, Pose2(1, 0, 0));
  g.add_variable(2, Pose2(2, 0, 0));
  EXPECT_THROW(g.add_variable(1, Pose2()), InvalidArgument);
  g.add_factor(Factor<Pose2>::between(FactorKind::LoopClosure, 1, 2, Pose2(1, 0, 0), {}));
  EXPECT_THROW(g.validate(), InvalidArgument);
  g.set_allow_adjacent_loop_closures(true);
  EXPECT_NO_THROW(g.validate());
  g.add_factor(Factor<Pose2>::between(FactorKind::Odometry, 2, 9, Pose2(), {}));
  EXPECT_THROW(g.validate(), KeyNotFound);
  EXPECT_FALSE(g.has_prior());
  g.add_prior(0, Pose2(), {});
  EXPECT_TRUE(g.has_prior());
  EXPECT_EQ(g.factor_indices(FactorKind::Prior), std::vector<std::size_t>{2});
}

TEST(GraphError, SinglePriorOffset) {
  PoseGraph<Pose3> g;
  g.add_variable(0, Pose3());
  g.add_prior(0, Pose3(), NoiseModel<6>::isotropic(4.0));
  Tangent6 d = Tangent6::Zero();
  d[3] = 1.5;  // whitened distance 2 * 1.5 = 3
  const Values<Pose3> v{{0, Pose3::exp(d)}};
  EXPECT_NEAR(graph_error(g, v), 9.0, 1e-12);
}

TEST(GraphError, MatchesNaiveSummation) {
  std::mt19937_64 rng(6);
  PoseGraph<Pose3> g;
  Values<Pose3> v;
  for (Key k = 0; k < 20; ++k) {
    g.add_variable(k, random_pose<Pose3>(rng));
    v[k] = random_pose<Pose3>(rng);
  }
  g.add_prior(0, random_pose<Pose3>(rng), random_noise<Pose3>(rng));
  std::uniform_int_distribution<Key> key(0, 19);
  for (int i = 0; i < 40; ++i) {
    Key a = key(rng), b = key(rng);
    if (a == b) continue;
    g.set_allow_adjacent_loop_closures(true);
    g.add_factor(Factor<Pose3>::between(FactorKind::LoopClosure, a, b, random_pose<Pose3>(rng),
                                        random_noise<Pose3>(rng)));
  }
  std::vector<double> w(g.factors().size());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& x : w) x = u(rng);
  double naive = 0.0, weighted = 0.0;
  for (std::size_t i = 0; i < g.factors().size(); ++i) {
    const auto& f = g.factors()[i];
    const Tangent6 r = residual(f, v);
    naive += r.dot(f.noise.information() * r);
    weighted += w[i] * r.dot(f.noise.information() * r);
  }
  EXPECT_NEAR(graph_error(g, v), naive, 1e-9 * naive);
  EXPECT_NEAR(graph_error(g, v, w), weighted, 1e-9 * weighted);
  EXPECT_THROW(graph_error(g, v, std::vector<double>(3, 1.0)), InvalidArgument);
}

}  // namespace
}  // namespace rpgo
