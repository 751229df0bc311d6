// Absolute translation error after closed-form trajectory alignment.
#pragma once

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <span>
#include <tuple>
#include <utility>
#include <vector>

#include "rpgo/errors.hpp"
#include "rpgo/geometry.hpp"

namespace rpgo {

struct TimedPose {
  double timestamp = 0.0;
  Pose3 pose;

  bool operator==(const TimedPose&) const = default;
};

enum class AlignmentMode { None, Rigid, Similarity };

struct AlignedErrorReport {
  double ate_rmse = 0.0;
  std::vector<double> errors;  // per associated pair, metres
  Pose3 alignment;             // applied to the estimate
  double scale = 1.0;
  bool rank_deficient = false;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (estimate, reference)
};

// Greedy nearest-timestamp association: candidate pairs within max_dt are
// taken in order of |dt| (ties by estimate index, then reference index),
// each pose used at most once. Output sorted by estimate index.
inline std::vector<std::pair<std::size_t, std::size_t>> associate(std::span<const TimedPose> est,
                                                                  std::span<const TimedPose> ref,
                                                                  double max_dt = 0.02) {
  std::vector<std::tuple<double, std::size_t, std::size_t>> cand;
  std::size_t lo = 0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const double t = est[i].timestamp;
    while (lo < ref.size() && ref[lo].timestamp < t - max_dt) ++lo;
    for (std::size_t j = lo; j < ref.size() && ref[j].timestamp <= t + max_dt; ++j) {
      cand.emplace_back(std::abs(ref[j].timestamp - t), i, j);
    }
  }
  std::sort(cand.begin(), cand.end());
  std::vector<bool> used_e(est.size(), false), used_r(ref.size(), false);
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& [dt, i, j] : cand) {
    if (used_e[i] || used_r[j]) continue;
    used_e[i] = used_r[j] = true;
    out.emplace_back(i, j);
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ATE over index-matched positions. The estimate is mapped onto the
// reference by the least-squares rigid (or similarity) transform.
inline AlignedErrorReport ate_rmse_positions(std::span<const Vector3> est,
                                             std::span<const Vector3> ref, AlignmentMode mode) {
  if (est.size() != ref.size()) throw InvalidArgument("ate_rmse: size mismatch");
  const std::size_t n = est.size();
  const std::size_t needed = mode == AlignmentMode::None ? 1 : 3;
  if (n < needed) {
    throw InvalidArgument("ate_rmse: need at least " + std::to_string(needed) + " associated poses");
  }
  AlignedErrorReport rep;
  if (mode != AlignmentMode::None) {
    Eigen::Matrix3Xd src(3, n), dst(3, n);
    for (std::size_t i = 0; i < n; ++i) {
      src.col(i) = est[i];
      dst.col(i) = ref[i];
    }
    const Eigen::Matrix3Xd centred = src.colwise() - src.rowwise().mean();
    const Eigen::Vector3d sv = Eigen::JacobiSVD<Eigen::Matrix3d>(centred * centred.transpose()).singularValues();
    rep.rank_deficient = !(sv[1] > 1e-12 * std::max(1.0, sv[0]));
    const Matrix4 T = Eigen::umeyama(src, dst, mode == AlignmentMode::Similarity);
    rep.scale = mode == AlignmentMode::Similarity ? std::cbrt(T.topLeftCorner<3, 3>().determinant()) : 1.0;
    const Matrix3 R = T.topLeftCorner<3, 3>() / rep.scale;
    rep.alignment = Pose3(Rotation3::from_matrix(R), T.topRightCorner<3, 1>());
  }
  const Matrix3 sR = rep.scale * rep.alignment.rotation().matrix();
  const Vector3 t = rep.alignment.translation();
  double sum = 0.0;
  rep.errors.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double e = (sR * est[i] + t - ref[i]).norm();
    rep.errors.push_back(e);
    sum += e * e;
  }
  rep.ate_rmse = std::sqrt(sum / static_cast<double>(n));
  return rep;
}

inline AlignedErrorReport ate_rmse(std::span<const TimedPose> est, std::span<const TimedPose> ref,
                                   AlignmentMode mode = AlignmentMode::Rigid, double max_dt = 0.02) {
  const auto pairs = associate(est, ref, max_dt);
  std::vector<Vector3> pe, pr;
  pe.reserve(pairs.size());
  pr.reserve(pairs.size());
  for (const auto& [i, j] : pairs) {
    pe.push_back(est[i].pose.translation());
    pr.push_back(ref[j].pose.translation());
  }
  AlignedErrorReport rep = ate_rmse_positions(pe, pr, mode);
  rep.pairs = pairs;
  return rep;
}

inline double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
inline double sample_stddev(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace rpgo
