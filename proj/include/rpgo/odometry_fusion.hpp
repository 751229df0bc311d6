// External odometry (wheel, LiDAR, ...) turned into relative-pose factors
// between keyframes.
#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "rpgo/errors.hpp"
#include "rpgo/factor_graph.hpp"

namespace rpgo {

template <PoseType P>
struct OdometrySample {
  double timestamp = 0.0;
  P pose;  // in the external source's world frame
};

template <PoseType P>
struct ExternalOdomConfig {
  Matrix<P::kDof> information = 100.0 * Matrix<P::kDof>::Identity();
  double max_extrapolation = 0.05;  // seconds past either end of the stream
  P frame_alignment = P::identity();  // body frame expressed in the sensor frame

  void validate() const {
    if (!(max_extrapolation >= 0.0)) throw ConfigError("max_extrapolation must be >= 0");
    NoiseModel<P::kDof>::from_information(information);
  }
};

namespace detail {

template <PoseType P>
void check_stream(std::span<const OdometrySample<P>> stream) {
  if (stream.empty()) throw InvalidArgument("external odometry stream is empty");
  for (std::size_t i = 1; i < stream.size(); ++i) {
    if (!(stream[i].timestamp > stream[i - 1].timestamp)) {
      throw InvalidStream("external odometry timestamps must be strictly increasing");
    }
  }
}

template <PoseType P>
P sample_unchecked(std::span<const OdometrySample<P>> stream, double t, double max_extrapolation) {
  const double t0 = stream.front().timestamp, t1 = stream.back().timestamp;
  if (t < t0 - max_extrapolation || t > t1 + max_extrapolation) {
    throw OutOfRange("external odometry has no coverage at t=" + std::to_string(t));
  }
  if (t <= t0) return stream.front().pose;
  if (t >= t1) return stream.back().pose;
  auto it = std::upper_bound(stream.begin(), stream.end(), t,
                             [](double v, const OdometrySample<P>& s) { return v < s.timestamp; });
  const auto& b = *it;
  const auto& a = *(it - 1);
  if (t == a.timestamp) return a.pose;
  const double frac = (t - a.timestamp) / (b.timestamp - a.timestamp);
  return interpolate(a.pose, b.pose, frac);
}

}  // namespace detail

// Geodesic interpolation between the bracketing samples; constant
// extrapolation up to max_extrapolation beyond the ends.
template <PoseType P>
P sample_at(std::span<const OdometrySample<P>> stream, double t, const ExternalOdomConfig<P>& cfg) {
  detail::check_stream(stream);
  return detail::sample_unchecked(stream, t, cfg.max_extrapolation);
}

// One ExternalOdometry factor per consecutive keyframe pair; keyframe k gets
// key first_key + k.
template <PoseType P>
std::vector<Factor<P>> make_between_factors(std::span<const OdometrySample<P>> stream,
                                            std::span<const double> keyframe_timestamps,
                                            const ExternalOdomConfig<P>& cfg, Key first_key = 0) {
  cfg.validate();
  std::vector<Factor<P>> out;
  if (keyframe_timestamps.size() < 2) return out;
  detail::check_stream(stream);
  const auto noise = NoiseModel<P::kDof>::from_information(cfg.information);
  const P align_inv = cfg.frame_alignment.inverse();
  P prev = detail::sample_unchecked(stream, keyframe_timestamps[0], cfg.max_extrapolation);
  for (std::size_t k = 1; k < keyframe_timestamps.size(); ++k) {
    const P cur = detail::sample_unchecked(stream, keyframe_timestamps[k], cfg.max_extrapolation);
    const P z = align_inv * prev.between(cur) * cfg.frame_alignment;
    out.push_back(Factor<P>::between(FactorKind::ExternalOdometry, first_key + k - 1, first_key + k,
                                     z, noise));
    prev = cur;
  }
  return out;
}

template <PoseType P>
std::vector<Factor<P>> make_between_factors(const std::vector<OdometrySample<P>>& stream,
                                            const std::vector<double>& keyframe_timestamps,
                                            const ExternalOdomConfig<P>& cfg, Key first_key = 0) {
  return make_between_factors(std::span<const OdometrySample<P>>(stream),
                              std::span<const double>(keyframe_timestamps), cfg, first_key);
}

}  // namespace rpgo
