// Synthetic pose graphs with labelled loop closures, external odometry and
// feature-track streams.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "rpgo/errors.hpp"
#include "rpgo/evaluation.hpp"
#include "rpgo/factor_graph.hpp"
#include "rpgo/frontend.hpp"
#include "rpgo/io.hpp"
#include "rpgo/odometry_fusion.hpp"
#include "rpgo/pcm.hpp"

namespace rpgo {

enum class TrajectoryShape { Grid, Loop, RandomWalk };
enum class OutlierMode { RandomTransform, WrongAssociation };

struct SynthConfig {
  Dimension dimension = Dimension::SE2;
  TrajectoryShape shape = TrajectoryShape::Grid;
  std::size_t pose_count = 500;
  double sigma_rot = 0.01;    // rad
  double sigma_trans = 0.05;  // m
  double loop_radius = 1.0;   // m
  std::size_t true_loop_count = 100;
  double outlier_ratio = 0.0;  // fraction of all loop candidates
  OutlierMode outlier_mode = OutlierMode::RandomTransform;
  std::uint64_t seed = 0;

  std::size_t min_loop_separation = 10;  // keys
  double step_length = 1.0;              // m
  double dt = 0.2;                       // s between poses

  bool external_odometry = false;
  double external_sigma_rot = 0.01;
  double external_sigma_trans = 0.05;

  void validate() const {
    if (pose_count < 2) throw ConfigError("pose count must be >= 2");
    if (!(outlier_ratio >= 0.0 && outlier_ratio < 1.0)) {
      throw ConfigError("outlier ratio must lie in [0, 1)");
    }
    if (!(sigma_rot >= 0.0) || !(sigma_trans >= 0.0) || !(external_sigma_rot >= 0.0) ||
        !(external_sigma_trans >= 0.0)) {
      throw ConfigError("noise sigmas must be >= 0");
    }
    if (!(loop_radius >= 0.0)) throw ConfigError("loop radius must be >= 0");
    if (!(step_length > 0.0) || !(dt > 0.0)) throw ConfigError("step length and dt must be > 0");
    if (min_loop_separation < 2) throw ConfigError("min loop separation must be >= 2");
  }

  std::size_t outlier_count() const {
    if (outlier_ratio == 0.0) return 0;
    return static_cast<std::size_t>(
        std::llround(outlier_ratio * static_cast<double>(true_loop_count) / (1.0 - outlier_ratio)));
  }
};

// Isotropic per block, rotation block first.
template <PoseType P>
Matrix<P::kDof> block_information(double sigma_rot, double sigma_trans) {
  constexpr int R = P::kDof == 3 ? 1 : 3;
  const double sr = std::max(sigma_rot, 1e-3), st = std::max(sigma_trans, 1e-3);
  Matrix<P::kDof> info = Matrix<P::kDof>::Zero();
  for (int i = 0; i < P::kDof; ++i) info(i, i) = i < R ? 1.0 / (sr * sr) : 1.0 / (st * st);
  return info;
}

template <PoseType P>
struct SynthDataset {
  std::vector<P> ground_truth;     // key k at index k
  std::vector<double> timestamps;  // k * dt
  std::vector<Factor<P>> odometry;
  std::vector<LoopCandidate<P>> loops;
  std::vector<OdometrySample<P>> external;  // empty unless requested
  Matrix<P::kDof> external_information = Matrix<P::kDof>::Identity();

  // Odometry composed from the ground-truth first pose.
  Values<P> initial_values() const {
    Values<P> v;
    P cur = ground_truth.front();
    v.emplace(0, cur);
    for (const auto& f : odometry) {
      cur = cur * f.measurement;
      v.emplace(f.key2, cur);
    }
    return v;
  }

  enum class Loops { All, InliersOnly, None };

  // Prior on key 0 at the ground truth, odometry, then loop closures in
  // candidate order.
  PoseGraph<P> graph(Loops which = Loops::All, double prior_information = 1e6) const {
    PoseGraph<P> g;
    for (const auto& [k, p] : initial_values()) g.add_variable(k, p);
    g.add_prior(0, ground_truth.front(), NoiseModel<P::kDof>::isotropic(prior_information));
    for (const auto& f : odometry) g.add_factor(f);
    if (which != Loops::None) {
      for (const auto& c : loops) {
        if (which == Loops::InliersOnly && !c.inlier.value_or(true)) continue;
        g.add_factor(Factor<P>::between(FactorKind::LoopClosure, c.from, c.to, c.measurement, c.noise));
      }
    }
    return g;
  }

  std::vector<TimedPose> ground_truth_tum() const {
    std::vector<TimedPose> out;
    out.reserve(ground_truth.size());
    for (std::size_t k = 0; k < ground_truth.size(); ++k) {
      if constexpr (P::kDof == 3) {
        out.push_back({timestamps[k], to_pose3(ground_truth[k])});
      } else {
        out.push_back({timestamps[k], ground_truth[k]});
      }
    }
    return out;
  }

  std::vector<TimedPose> external_tum() const {
    std::vector<TimedPose> out;
    for (const auto& s : external) {
      if constexpr (P::kDof == 3) {
        out.push_back({s.timestamp, to_pose3(s.pose)});
      } else {
        out.push_back({s.timestamp, s.pose});
      }
    }
    return out;
  }

  // Vertices at composed odometry; edges are odometry then loops, labelled.
  G2oGraph<P> to_g2o() const {
    G2oGraph<P> g;
    g.vertices = initial_values();
    auto push = [&](Key a, Key b, const P& z, const NoiseModel<P::kDof>& n) {
      G2oEdge<P> e;
      e.from = a;
      e.to = b;
      e.measurement = z;
      e.set_information(n.information());
      g.edges.push_back(e);
    };
    for (const auto& f : odometry) push(f.key1, f.key2, f.measurement, f.noise);
    for (const auto& c : loops) {
      if (c.inlier) g.labels[g.edges.size()] = *c.inlier;
      push(c.from, c.to, c.measurement, c.noise);
    }
    return g;
  }
};

using AnySynthDataset = std::variant<SynthDataset<Pose2>, SynthDataset<Pose3>>;

namespace detail {

inline Rotation3 uniform_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  while (true) {
    const double w = n(rng), x = n(rng), y = n(rng), z = n(rng);
    if (w * w + x * x + y * y + z * z > 1e-12) return Rotation3::from_quaternion(w, x, y, z);
  }
}

template <PoseType P>
typename P::Tangent block_noise(std::mt19937_64& rng, double sigma_rot, double sigma_trans) {
  constexpr int R = P::kDof == 3 ? 1 : 3;
  std::normal_distribution<double> n(0.0, 1.0);
  typename P::Tangent xi;
  for (int i = 0; i < P::kDof; ++i) xi[i] = n(rng) * (i < R ? sigma_rot : sigma_trans);
  return xi;
}

template <PoseType P>
P with_noise(const P& z, std::mt19937_64& rng, double sigma_rot, double sigma_trans) {
  if (sigma_rot == 0.0 && sigma_trans == 0.0) return z;
  return z * P::exp(block_noise<P>(rng, sigma_rot, sigma_trans));
}

template <PoseType P>
Vector3 position_of(const P& p) {
  if constexpr (P::kDof == 3) {
    return Vector3(p.x(), p.y(), 0.0);
  } else {
    return p.translation();
  }
}

template <PoseType P>
P make_pose(const Vector3& pos, double yaw) {
  if constexpr (P::kDof == 3) {
    return Pose2(pos.x(), pos.y(), yaw);
  } else {
    return Pose3(Rotation3::yaw(yaw), pos);
  }
}

template <PoseType P>
std::vector<P> make_trajectory(const SynthConfig& cfg, std::mt19937_64& rng) {
  constexpr bool planar = P::kDof == 3;
  const std::size_t n = cfg.pose_count;
  const double step = cfg.step_length;
  std::vector<P> out;
  out.reserve(n);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  switch (cfg.shape) {
    case TrajectoryShape::Grid: {
      // Manhattan walk on a lattice inside a square box, a few z levels in 3D.
      const long side = std::max<long>(3, static_cast<long>(std::ceil(std::sqrt(static_cast<double>(n)) / 2.0)));
      const long levels = planar ? 1 : 3;
      long x = 0, y = 0, z = 0;
      int heading = 0;  // 0:+x 1:+y 2:-x 3:-y
      const long dx[4] = {1, 0, -1, 0}, dy[4] = {0, 1, 0, -1};
      out.push_back(make_pose<P>(Vector3::Zero(), 0.0));
      for (std::size_t i = 1; i < n; ++i) {
        if (!planar && u(rng) < 0.1) {
          const long dz = (z == 0) ? 1 : (z == levels - 1 ? -1 : (u(rng) < 0.5 ? -1 : 1));
          z += dz;
        } else {
          std::vector<int> options;
          for (int turn : {0, 1, 3}) {
            const int h = (heading + turn) % 4;
            const long nx = x + dx[h], ny = y + dy[h];
            if (nx >= 0 && ny >= 0 && nx < side && ny < side) options.push_back(h);
          }
          if (options.empty()) options.push_back((heading + 2) % 4);
          int h = options.front();
          if (!(h == heading && u(rng) < 0.6)) {
            std::uniform_int_distribution<std::size_t> pick(0, options.size() - 1);
            h = options[pick(rng)];
          }
          heading = h;
          x += dx[h];
          y += dy[h];
        }
        out.push_back(make_pose<P>(Vector3(x * step, y * step, z * step), heading * std::numbers::pi / 2.0));
      }
      break;
    }
    case TrajectoryShape::Loop: {
      const double laps = 3.0;
      const double dphi = 2.0 * std::numbers::pi * laps / static_cast<double>(n);
      const double radius = step / (2.0 * std::sin(std::min(dphi, std::numbers::pi / 2.0) / 2.0));
      for (std::size_t i = 0; i < n; ++i) {
        const double phi = dphi * static_cast<double>(i);
        const double zz = planar ? 0.0 : 0.5 * std::sin(2.0 * phi);
        out.push_back(make_pose<P>(Vector3(radius * std::sin(phi), radius * (1.0 - std::cos(phi)), zz), phi));
      }
      break;
    }
    case TrajectoryShape::RandomWalk: {
      std::normal_distribution<double> turn(0.0, 0.3), climb(0.0, 0.1);
      Vector3 pos = Vector3::Zero();
      double yaw = 0.0;
      out.push_back(make_pose<P>(pos, yaw));
      for (std::size_t i = 1; i < n; ++i) {
        yaw += turn(rng);
        pos += step * Vector3(std::cos(yaw), std::sin(yaw), 0.0);
        if (!planar) pos.z() += climb(rng);
        out.push_back(make_pose<P>(pos, yaw));
      }
      break;
    }
  }
  return out;
}

inline double diameter(std::span<const Vector3> pts) {
  double best = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) best = std::max(best, (pts[i] - pts[j]).squaredNorm());
  }
  return std::sqrt(best);
}

template <PoseType P>
P random_transform(std::mt19937_64& rng, double max_translation) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n(0.0, 1.0);
  const double r = max_translation * u(rng);
  if constexpr (P::kDof == 3) {
    const double dir = 2.0 * std::numbers::pi * u(rng);
    const double th = std::numbers::pi * (2.0 * u(rng) - 1.0);
    return Pose2(r * std::cos(dir), r * std::sin(dir), th);
  } else {
    Vector3 d(n(rng), n(rng), n(rng));
    while (d.norm() < 1e-12) d = Vector3(n(rng), n(rng), n(rng));
    return Pose3(uniform_rotation(rng), r * d.normalized());
  }
}

}  // namespace detail

template <PoseType P>
SynthDataset<P> generate(const SynthConfig& cfg) {
  cfg.validate();
  if (cfg.dimension != dimension_of<P>()) throw ConfigError("config dimension does not match pose type");
  std::mt19937_64 rng(cfg.seed);
  SynthDataset<P> ds;
  ds.ground_truth = detail::make_trajectory<P>(cfg, rng);
  const std::size_t n = ds.ground_truth.size();
  for (std::size_t k = 0; k < n; ++k) ds.timestamps.push_back(static_cast<double>(k) * cfg.dt);

  const auto noise = NoiseModel<P::kDof>::from_information(block_information<P>(cfg.sigma_rot, cfg.sigma_trans));
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const P rel = ds.ground_truth[k].between(ds.ground_truth[k + 1]);
    ds.odometry.push_back(Factor<P>::between(FactorKind::Odometry, k, k + 1,
                                             detail::with_noise(rel, rng, cfg.sigma_rot, cfg.sigma_trans),
                                             noise));
  }

  std::vector<Vector3> pos;
  pos.reserve(n);
  for (const auto& p : ds.ground_truth) pos.push_back(detail::position_of(p));
  auto is_near = [&](std::size_t i, std::size_t j) {
    return j >= i + cfg.min_loop_separation && (pos[i] - pos[j]).norm() <= cfg.loop_radius;
  };
  std::vector<std::pair<std::size_t, std::size_t>> near;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + cfg.min_loop_separation; j < n; ++j) {
      if (is_near(i, j)) near.emplace_back(i, j);
    }
  }
  if (cfg.true_loop_count > near.size()) {
    throw ConfigError("requested " + std::to_string(cfg.true_loop_count) + " true loops but only " +
                      std::to_string(near.size()) + " near pose pairs exist");
  }
  std::shuffle(near.begin(), near.end(), rng);

  for (std::size_t l = 0; l < cfg.true_loop_count; ++l) {
    const auto [i, j] = near[l];
    const P rel = ds.ground_truth[i].between(ds.ground_truth[j]);
    ds.loops.push_back({i, j, detail::with_noise(rel, rng, cfg.sigma_rot, cfg.sigma_trans), noise, true});
  }

  const std::size_t outliers = cfg.outlier_count();
  if (outliers > 0) {
    if (near.empty()) throw ConfigError("no near pose pairs to draw outliers from");
    if (cfg.outlier_mode == OutlierMode::RandomTransform) {
      const double max_t = 5.0 * std::max(detail::diameter(pos), cfg.step_length);
      std::size_t next = cfg.true_loop_count;
      std::uniform_int_distribution<std::size_t> any(0, near.size() - 1);
      for (std::size_t l = 0; l < outliers; ++l) {
        const auto [i, j] = next < near.size() ? near[next++] : near[any(rng)];
        ds.loops.push_back({i, j, detail::random_transform<P>(rng, max_t), noise, false});
      }
    } else {
      if (n < cfg.min_loop_separation + 1) throw ConfigError("trajectory too short for wrong associations");
      std::uniform_int_distribution<std::size_t> key(0, n - 1);
      std::uniform_int_distribution<std::size_t> any(0, near.size() - 1);
      for (std::size_t l = 0; l < outliers; ++l) {
        std::size_t i = 0, j = 0;
        bool found = false;
        for (int attempt = 0; attempt < 100000 && !found; ++attempt) {
          i = key(rng);
          j = key(rng);
          if (i > j) std::swap(i, j);
          found = j >= i + cfg.min_loop_separation && !is_near(i, j);
        }
        if (!found) throw ConfigError("no non-near pose pairs for wrong associations");
        const auto [a, b] = near[any(rng)];
        const P rel = ds.ground_truth[a].between(ds.ground_truth[b]);
        ds.loops.push_back({i, j, detail::with_noise(rel, rng, cfg.sigma_rot, cfg.sigma_trans), noise, false});
      }
    }
  }
  std::shuffle(ds.loops.begin(), ds.loops.end(), rng);

  if (cfg.external_odometry) {
    ds.external_information = block_information<P>(cfg.external_sigma_rot, cfg.external_sigma_trans);
    P cur = ds.ground_truth.front();
    ds.external.push_back({ds.timestamps[0], cur});
    for (std::size_t k = 0; k + 1 < n; ++k) {
      const P rel = ds.ground_truth[k].between(ds.ground_truth[k + 1]);
      cur = cur * detail::with_noise(rel, rng, cfg.external_sigma_rot, cfg.external_sigma_trans);
      ds.external.push_back({ds.timestamps[k + 1], cur});
    }
  }
  return ds;
}

inline AnySynthDataset generate_any(const SynthConfig& cfg) {
  if (cfg.dimension == Dimension::SE2) return generate<Pose2>(cfg);
  return generate<Pose3>(cfg);
}

// ---------------------------------------------------------------------------
// Feature-track streams.
// ---------------------------------------------------------------------------
struct FeatureStreamConfig {
  std::size_t track_count = 150;
  double gain_rot = 300.0;    // px per rad
  double gain_trans = 100.0;  // px per m
  ImageSize image_size;
  std::vector<std::pair<double, double>> stationary;  // [begin, end) time intervals with no flow
  std::uint64_t seed = 0;

  void validate() const {
    if (track_count < 1) throw ConfigError("track count must be >= 1");
    if (!(gain_rot >= 0.0) || !(gain_trans >= 0.0)) throw ConfigError("flow gains must be >= 0");
    if (image_size.width <= 0 || image_size.height <= 0) throw ConfigError("image size must be positive");
  }
};

// Per-frame flow magnitude for the motion from a to b.
template <PoseType P>
double flow_norm(const P& a, const P& b, double gain_rot, double gain_trans) {
  constexpr int R = P::kDof == 3 ? 1 : 3;
  const typename P::Tangent xi = a.between(b).log();
  const double r = gain_rot * xi.template head<R>().norm();
  const double t = gain_trans * xi.template tail<P::kDof - R>().norm();
  return std::hypot(r, t);
}

// Every live track moves horizontally by the frame's flow; tracks that leave
// the image are replaced by fresh ones at random positions.
template <PoseType P>
std::vector<TrackedFeatureFrame> generate_feature_stream(std::span<const OdometrySample<P>> trajectory,
                                                         const FeatureStreamConfig& cfg) {
  cfg.validate();
  if (trajectory.size() < 2) throw InvalidArgument("feature stream needs at least 2 poses");
  std::mt19937_64 rng(cfg.seed);
  const double w = cfg.image_size.width, h = cfg.image_size.height;
  std::uniform_real_distribution<double> ux(0.0, w), uy(0.0, h), ur(0.0, 1.0);
  TrackId next_id = 0;
  auto spawn = [&] {
    Keypoint k;
    k.position = Vector2(ux(rng), uy(rng));
    k.response = ur(rng);
    k.track_id = next_id++;
    return k;
  };
  std::vector<Keypoint> live;
  for (std::size_t i = 0; i < cfg.track_count; ++i) live.push_back(spawn());
  std::vector<TrackedFeatureFrame> frames;
  frames.push_back({trajectory[0].timestamp, live, cfg.image_size});
  for (std::size_t f = 1; f < trajectory.size(); ++f) {
    const double t = trajectory[f].timestamp;
    bool still = false;
    for (const auto& [b, e] : cfg.stationary) still = still || (t >= b && t < e);
    const double d = still ? 0.0 : flow_norm(trajectory[f - 1].pose, trajectory[f].pose, cfg.gain_rot, cfg.gain_trans);
    for (auto& k : live) {
      k.position.x() += d;
      if (k.position.x() > w) k = spawn();
    }
    frames.push_back({t, live, cfg.image_size});
  }
  return frames;
}

template <PoseType P>
std::vector<TrackedFeatureFrame> generate_feature_stream(const std::vector<OdometrySample<P>>& trajectory,
                                                         const FeatureStreamConfig& cfg) {
  return generate_feature_stream(std::span<const OdometrySample<P>>(trajectory), cfg);
}

struct StopAndGoConfig {
  std::size_t segments = 4;          // moving segments, each followed by a stop
  double moving_duration = 10.0;     // s
  double stationary_duration = 10.0;  // s
  double dt = 0.05;                  // s
  double speed = 1.0;                // m/s
  double yaw_rate = 0.1;             // rad/s
};

struct StopAndGo {
  std::vector<OdometrySample<Pose3>> trajectory;
  std::vector<std::pair<double, double>> stationary;  // (begin, end] intervals of zero motion
};

// Alternating constant-velocity and stationary segments. Frames are evenly
// spaced; a frame belongs to a stationary interval when the motion into it
// is zero.
inline StopAndGo stop_and_go_trajectory(const StopAndGoConfig& cfg) {
  if (!(cfg.dt > 0.0) || !(cfg.moving_duration > 0.0) || !(cfg.stationary_duration >= 0.0)) {
    throw ConfigError("stop-and-go durations must be positive");
  }
  const auto move_steps = static_cast<std::size_t>(std::llround(cfg.moving_duration / cfg.dt));
  const auto stop_steps = static_cast<std::size_t>(std::llround(cfg.stationary_duration / cfg.dt));
  StopAndGo out;
  Pose3 cur;
  std::size_t frame = 0;
  out.trajectory.push_back({0.0, cur});
  const Pose3 step = Pose3::exp((Tangent6() << 0.0, 0.0, cfg.yaw_rate * cfg.dt, cfg.speed * cfg.dt, 0.0, 0.0).finished());
  for (std::size_t s = 0; s < cfg.segments; ++s) {
    for (std::size_t i = 0; i < move_steps; ++i) {
      cur = cur * step;
      out.trajectory.push_back({static_cast<double>(++frame) * cfg.dt, cur});
    }
    if (stop_steps > 0) {
      const double begin = static_cast<double>(frame) * cfg.dt;
      for (std::size_t i = 0; i < stop_steps; ++i) {
        out.trajectory.push_back({static_cast<double>(++frame) * cfg.dt, cur});
      }
      out.stationary.emplace_back(begin, static_cast<double>(frame) * cfg.dt);
    }
  }
  return out;
}

}  // namespace rpgo
