// Keyframe selection, feature binning and non-maximum suppression over
// pre-associated keypoint tracks.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <unordered_map>
#include <vector>

#include "rpgo/errors.hpp"
#include "rpgo/geometry.hpp"

namespace rpgo {

using TrackId = std::uint64_t;

struct Keypoint {
  Vector2 position = Vector2::Zero();  // pixels
  double response = 0.0;
  TrackId track_id = 0;

  bool operator==(const Keypoint&) const = default;
};

struct ImageSize {
  int width = 752;
  int height = 480;

  bool operator==(const ImageSize&) const = default;
};

struct TrackedFeatureFrame {
  double timestamp = 0.0;
  std::vector<Keypoint> keypoints;
  ImageSize image_size;

  bool operator==(const TrackedFeatureFrame&) const = default;
};

// Coarse grid over the image; each cell is either denied or allowed with a
// keypoint quota.
struct BinningMask {
  struct Cell {
    bool allowed = true;
    int quota = std::numeric_limits<int>::max();

    bool operator==(const Cell&) const = default;
  };

  int rows = 1;
  int cols = 1;
  std::vector<Cell> cells{Cell{}};  // row-major

  static BinningMask uniform(int rows, int cols, int quota) {
    if (rows < 1 || cols < 1) throw InvalidArgument("BinningMask: grid must be at least 1x1");
    if (quota < 0) throw InvalidArgument("BinningMask: quota must be >= 0");
    BinningMask m;
    m.rows = rows;
    m.cols = cols;
    m.cells.assign(static_cast<std::size_t>(rows) * cols, Cell{true, quota});
    return m;
  }

  Cell& at(int r, int c) { return cells[static_cast<std::size_t>(r) * cols + c]; }
  const Cell& at(int r, int c) const { return cells[static_cast<std::size_t>(r) * cols + c]; }

  void validate() const {
    if (rows < 1 || cols < 1) throw InvalidArgument("BinningMask: grid must be at least 1x1");
    if (cells.size() != static_cast<std::size_t>(rows) * cols) {
      throw InvalidArgument("BinningMask: cell count does not match grid");
    }
    for (const auto& c : cells) {
      if (c.quota < 0) throw InvalidArgument("BinningMask: quota must be >= 0");
    }
  }

  bool operator==(const BinningMask&) const = default;
};

struct KeyframeConfig {
  double max_disparity_since_lkf = 100.0;  // pixels, mean optical-flow norm
  double max_time_between_keyframes = 1.0;  // seconds

  void validate() const {
    if (!(max_disparity_since_lkf > 0.0) || !(max_time_between_keyframes > 0.0)) {
      throw ConfigError("KeyframeConfig: thresholds must be > 0");
    }
  }
};

enum class KeyframeTrigger { None, Disparity, Time, TrackingLost };

struct KeyframeDecision {
  bool keyframe = false;
  double disparity = 0.0;
  KeyframeTrigger trigger = KeyframeTrigger::None;
};

// Mean displacement of the tracks present in both frames; +inf when none are.
inline double mean_disparity(const TrackedFeatureFrame& frame, const TrackedFeatureFrame& ref) {
  std::unordered_map<TrackId, Vector2> ref_pos;
  ref_pos.reserve(ref.keypoints.size());
  for (const auto& k : ref.keypoints) ref_pos.emplace(k.track_id, k.position);
  double sum = 0.0;
  std::size_t common = 0;
  for (const auto& k : frame.keypoints) {
    auto it = ref_pos.find(k.track_id);
    if (it == ref_pos.end()) continue;
    sum += (k.position - it->second).norm();
    ++common;
  }
  if (common == 0) return std::numeric_limits<double>::infinity();
  return sum / static_cast<double>(common);
}

inline KeyframeDecision select_keyframe(const TrackedFeatureFrame& frame,
                                        const TrackedFeatureFrame& last_keyframe,
                                        const KeyframeConfig& cfg) {
  cfg.validate();
  if (!(frame.timestamp > last_keyframe.timestamp)) {
    throw InvalidStream("select_keyframe: timestamps must be strictly increasing");
  }
  KeyframeDecision d;
  d.disparity = mean_disparity(frame, last_keyframe);
  if (std::isinf(d.disparity)) {
    d.trigger = KeyframeTrigger::TrackingLost;
  } else if (d.disparity >= cfg.max_disparity_since_lkf) {
    d.trigger = KeyframeTrigger::Disparity;
  } else if (frame.timestamp - last_keyframe.timestamp >= cfg.max_time_between_keyframes) {
    d.trigger = KeyframeTrigger::Time;
  }
  d.keyframe = d.trigger != KeyframeTrigger::None;
  return d;
}

struct KeyframeReplay {
  std::vector<std::size_t> keyframes;  // frame indices; the first frame is always one
  std::vector<KeyframeDecision> decisions;  // one per frame (first frame: trigger None)
};

inline KeyframeReplay replay_keyframes(std::span<const TrackedFeatureFrame> frames,
                                       const KeyframeConfig& cfg) {
  KeyframeReplay out;
  if (frames.empty()) return out;
  out.keyframes.push_back(0);
  out.decisions.push_back({true, 0.0, KeyframeTrigger::None});
  std::size_t last = 0;
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (!(frames[i].timestamp > frames[i - 1].timestamp)) {
      throw InvalidStream("replay_keyframes: timestamps must be strictly increasing");
    }
    const KeyframeDecision d = select_keyframe(frames[i], frames[last], cfg);
    out.decisions.push_back(d);
    if (d.keyframe) {
      out.keyframes.push_back(i);
      last = i;
    }
  }
  return out;
}

namespace detail {

inline bool stronger(const Keypoint& a, const Keypoint& b) {
  if (a.response != b.response) return a.response > b.response;
  return a.track_id < b.track_id;
}

inline void check_in_bounds(const Keypoint& k, const ImageSize& size) {
  const double x = k.position.x(), y = k.position.y();
  if (!(x >= 0.0 && y >= 0.0 && x <= size.width && y <= size.height)) {
    throw InvalidArgument("keypoint " + std::to_string(k.track_id) + " lies outside the image");
  }
}

}  // namespace detail

// Drops keypoints in denied cells and keeps the strongest `quota` per allowed
// cell. Output is cell-major, strongest first within a cell.
inline TrackedFeatureFrame bin_features(const TrackedFeatureFrame& frame, const BinningMask& mask) {
  mask.validate();
  const ImageSize size = frame.image_size;
  if (size.width <= 0 || size.height <= 0) throw InvalidArgument("bin_features: empty image");
  std::vector<std::vector<Keypoint>> per_cell(mask.cells.size());
  for (const auto& k : frame.keypoints) {
    detail::check_in_bounds(k, size);
    const int c = std::min(mask.cols - 1, static_cast<int>(k.position.x() * mask.cols / size.width));
    const int r = std::min(mask.rows - 1, static_cast<int>(k.position.y() * mask.rows / size.height));
    per_cell[static_cast<std::size_t>(r) * mask.cols + c].push_back(k);
  }
  TrackedFeatureFrame out{frame.timestamp, {}, size};
  for (std::size_t i = 0; i < per_cell.size(); ++i) {
    const auto& cell = mask.cells[i];
    if (!cell.allowed) continue;
    auto& kps = per_cell[i];
    std::sort(kps.begin(), kps.end(), detail::stronger);
    const std::size_t keep = std::min(kps.size(), static_cast<std::size_t>(cell.quota));
    out.keypoints.insert(out.keypoints.end(), kps.begin(), kps.begin() + keep);
  }
  return out;
}

// Greedy suppression by descending response: a keypoint survives when no
// already accepted keypoint lies strictly closer than `radius`. A uniform
// grid of cell size `radius` limits the neighbour checks.
inline std::vector<Keypoint> nms_radius(std::span<const Keypoint> keypoints, double radius) {
  if (!(radius > 0.0)) throw InvalidArgument("nms_radius: radius must be > 0");
  std::vector<Keypoint> sorted(keypoints.begin(), keypoints.end());
  std::sort(sorted.begin(), sorted.end(), detail::stronger);

  struct CellHash {
    std::size_t operator()(const std::pair<long long, long long>& c) const {
      return std::hash<long long>()(c.first * 73856093LL ^ c.second * 19349663LL);
    }
  };
  std::unordered_map<std::pair<long long, long long>, std::vector<Vector2>, CellHash> grid;
  const double r2 = radius * radius;
  std::vector<Keypoint> out;
  for (const auto& k : sorted) {
    const long long cx = static_cast<long long>(std::floor(k.position.x() / radius));
    const long long cy = static_cast<long long>(std::floor(k.position.y() / radius));
    bool suppressed = false;
    for (long long dx = -1; dx <= 1 && !suppressed; ++dx) {
      for (long long dy = -1; dy <= 1 && !suppressed; ++dy) {
        auto it = grid.find({cx + dx, cy + dy});
        if (it == grid.end()) continue;
        for (const auto& p : it->second) {
          if ((p - k.position).squaredNorm() < r2) {
            suppressed = true;
            break;
          }
        }
      }
    }
    if (suppressed) continue;
    grid[{cx, cy}].push_back(k.position);
    out.push_back(k);
  }
  return out;
}

struct AdaptiveNmsResult {
  std::vector<Keypoint> keypoints;
  double radius = 0.0;  // suppression radius that produced `keypoints`
};

// Binary search over the suppression radius for a result of between
// target_count and 1.1 * target_count keypoints. Inputs already within that
// window are returned unchanged. When the count jumps over the window the
// smallest result above target_count is returned.
inline AdaptiveNmsResult nms_adaptive(std::span<const Keypoint> keypoints, std::size_t target_count,
                                      const ImageSize& image_size) {
  if (target_count < 1) throw InvalidArgument("nms_adaptive: target_count must be >= 1");
  const std::size_t upper = static_cast<std::size_t>(std::floor(1.1 * static_cast<double>(target_count)));
  AdaptiveNmsResult best;
  if (keypoints.size() <= std::max(upper, target_count)) {
    best.keypoints.assign(keypoints.begin(), keypoints.end());
    std::sort(best.keypoints.begin(), best.keypoints.end(), detail::stronger);
    return best;
  }
  double lo = 0.0;
  double hi = std::hypot(static_cast<double>(image_size.width), static_cast<double>(image_size.height));
  bool have_fallback = false;
  for (int it = 0; it < 64; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (!(mid > 0.0)) break;
    auto kept = nms_radius(keypoints, mid);
    if (kept.size() >= target_count && kept.size() <= upper) {
      return {std::move(kept), mid};
    }
    if (kept.size() > upper) {
      if (!have_fallback || kept.size() < best.keypoints.size()) {
        best = {kept, mid};
        have_fallback = true;
      }
      lo = mid;
    } else {
      hi = mid;
    }
  }
  if (!have_fallback) {
    best.keypoints.assign(keypoints.begin(), keypoints.end());
    std::sort(best.keypoints.begin(), best.keypoints.end(), detail::stronger);
    best.radius = 0.0;
  }
  return best;
}

}  // namespace rpgo
