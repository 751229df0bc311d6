// Subcommands of the rpgo tool and the back-end pipeline they share.
#pragma once

#include <algorithm>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rpgo/rpgo.hpp"

namespace rpgo::cli {

enum ExitCode : int { kSuccess = 0, kUsage = 1, kNumerical = 2, kIo = 3 };

enum class RobustMode { None, Pcm, Gnc, PcmGnc };

std::string to_string(RobustMode mode);
RobustMode parse_robust_mode(std::string_view name);

struct PipelineConfig {
  RobustMode robust = RobustMode::None;
  PcmConfig pcm;
  GncConfig gnc;
  OptimizerConfig optimizer;
};

template <PoseType P>
struct PipelineResult {
  OptimizeResult<P> optimized;
  std::vector<std::size_t> loop_factors;  // factor indices of every loop closure
  std::vector<bool> accepted;             // parallel to loop_factors
  int gnc_outer_iterations = 0;
};

// pcm+gnc runs GNC on the PCM-consistent subset.
template <PoseType P>
PipelineResult<P> run_pipeline(const PoseGraph<P>& g, const PipelineConfig& cfg) {
  auto [cands, loop_idx] = loop_candidates_of(g);
  PipelineResult<P> out;
  out.loop_factors = loop_idx;
  out.accepted.assign(loop_idx.size(), true);

  if (cfg.robust == RobustMode::Pcm || cfg.robust == RobustMode::PcmGnc) {
    std::fill(out.accepted.begin(), out.accepted.end(), false);
    if (!cands.empty()) {
      const auto chain = OdometryChain<P>::from_graph(g);
      for (std::size_t i : pcm_select(cands, chain, cfg.pcm)) out.accepted[i] = true;
    }
  }

  if (cfg.robust == RobustMode::None || cfg.robust == RobustMode::Pcm) {
    std::vector<double> w(g.factors().size(), 1.0);
    for (std::size_t i = 0; i < loop_idx.size(); ++i) {
      if (!out.accepted[i]) w[loop_idx[i]] = 0.0;
    }
    out.optimized = optimize(g, g.initial_values(), w, cfg.optimizer);
    return out;
  }

  PoseGraph<P> sub;
  sub.set_allow_adjacent_loop_closures(g.allow_adjacent_loop_closures());
  for (const auto& [k, p] : g.initial_values()) sub.add_variable(k, p);
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> sub_to_loop;
  std::size_t next = 0;
  for (std::size_t i = 0; i < g.factors().size(); ++i) {
    std::size_t loop = kNone;
    if (next < loop_idx.size() && loop_idx[next] == i) {
      loop = next++;
      if (!out.accepted[loop]) continue;
    }
    sub.add_factor(g.factors()[i]);
    sub_to_loop.push_back(loop);
  }
  const auto gnc = gnc_optimize(sub, cfg.gnc, cfg.optimizer);
  std::fill(out.accepted.begin(), out.accepted.end(), false);
  for (std::size_t f : gnc.inliers) out.accepted[sub_to_loop.at(f)] = true;
  out.optimized = gnc.result;
  out.gnc_outer_iterations = gnc.outer_iterations;
  return out;
}

// Adds ExternalOdometry factors between consecutive keys; key k is sampled at
// time k * keyframe_dt. Returns the number of factors added.
template <PoseType P>
std::size_t add_external_odometry(PoseGraph<P>& g, std::span<const OdometrySample<P>> stream,
                                  double keyframe_dt, const ExternalOdomConfig<P>& cfg) {
  const auto& values = g.initial_values();
  if (values.size() < 2) return 0;
  const Key first = values.begin()->first;
  const Key last = values.rbegin()->first;
  if (last - first + 1 != values.size()) {
    throw InvalidArgument("external odometry needs consecutive vertex ids");
  }
  std::vector<double> times;
  for (const auto& kv : values) times.push_back(static_cast<double>(kv.first) * keyframe_dt);
  const auto factors = make_between_factors(stream, std::span<const double>(times), cfg, first);
  for (const auto& f : factors) g.add_factor(f);
  return factors.size();
}

template <PoseType P>
std::vector<OdometrySample<P>> samples_from_tum(std::span<const TimedPose> poses) {
  std::vector<OdometrySample<P>> out;
  out.reserve(poses.size());
  for (const auto& p : poses) {
    if constexpr (P::kDof == 3) {
      out.push_back({p.timestamp, to_pose2(p.pose)});
    } else {
      out.push_back({p.timestamp, p.pose});
    }
  }
  return out;
}

template <PoseType P>
std::vector<TimedPose> values_to_tum(const Values<P>& values, double keyframe_dt) {
  std::vector<TimedPose> out;
  out.reserve(values.size());
  for (const auto& [k, p] : values) {
    const double t = static_cast<double>(k) * keyframe_dt;
    if constexpr (P::kDof == 3) {
      out.push_back({t, to_pose3(p)});
    } else {
      out.push_back({t, p});
    }
  }
  return out;
}

struct AblationRow {
  std::string dataset;
  std::string config;
  std::vector<double> ate;  // successful trials
  std::size_t failures = 0;
};

// Avg/Std over successful trials; any failed trial renders the row as "--".
std::string ablation_summary_csv(std::span<const AblationRow> rows);
std::string ablation_table(std::span<const AblationRow> rows);

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv);

}  // namespace rpgo::cli
