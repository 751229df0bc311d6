// Pairwise consistent measurement set maximization for loop-closure
// candidates along a single odometry chain.
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "rpgo/factor_graph.hpp"
#include "rpgo/gnc.hpp"
#include "rpgo/max_clique.hpp"

namespace rpgo {

template <PoseType P>
struct LoopCandidate {
  Key from = 0;
  Key to = 0;
  P measurement;  // pose of `to` expressed in the frame of `from`
  NoiseModel<P::kDof> noise;
  std::optional<bool> inlier;  // ground-truth label, synthetic data only
};

// Cumulative odometry over consecutive keys first, first+1, ..., first+n.
template <PoseType P>
class OdometryChain {
 public:
  using Cov = Matrix<P::kDof>;

  OdometryChain() = default;

  OdometryChain(Key first, std::span<const P> steps, std::span<const Cov> step_covariances = {})
      : first_(first), steps_(steps.begin(), steps.end()) {
    if (!step_covariances.empty() && step_covariances.size() != steps.size()) {
      throw InvalidArgument("OdometryChain: covariance count does not match step count");
    }
    covs_.assign(step_covariances.begin(), step_covariances.end());
    if (covs_.empty()) covs_.assign(steps_.size(), Cov::Identity());
    cumulative_.reserve(steps_.size() + 1);
    cumulative_.push_back(P::identity());
    for (const P& s : steps_) cumulative_.push_back(cumulative_.back() * s);
  }

  // Walks odometry factors (key, key + 1) upward from the smallest key that
  // starts one.
  static OdometryChain from_graph(const PoseGraph<P>& g) {
    std::map<Key, const Factor<P>*> next;
    for (const auto& f : g.factors()) {
      if (f.kind == FactorKind::Odometry && f.key2 == f.key1 + 1) next.emplace(f.key1, &f);
    }
    if (next.empty()) return OdometryChain(g.initial_values().empty() ? 0 : g.initial_values().begin()->first, {});
    const Key first = next.begin()->first;
    std::vector<P> steps;
    std::vector<Cov> covs;
    for (Key k = first;; ++k) {
      auto it = next.find(k);
      if (it == next.end()) break;
      steps.push_back(it->second->measurement);
      covs.push_back(it->second->noise.covariance());
    }
    return OdometryChain(first, steps, covs);
  }

  Key first_key() const { return first_; }
  Key last_key() const { return first_ + steps_.size(); }
  bool contains(Key k) const { return k >= first_ && k <= last_key(); }

  // Pose of j expressed in the frame of i.
  P between(Key i, Key j) const {
    require(i);
    require(j);
    return cumulative_[i - first_].between(cumulative_[j - first_]);
  }

  // Right-perturbation covariance of between(i, j), steps independent.
  Cov covariance_between(Key i, Key j) const {
    require(i);
    require(j);
    if (i > j) {
      const typename P::Jacobian A = between(j, i).adjoint();
      return A * covariance_between(j, i) * A.transpose();
    }
    Cov sigma = Cov::Zero();
    for (Key k = i; k < j; ++k) {
      const typename P::Jacobian A = steps_[k - first_].inverse().adjoint();
      sigma = A * sigma * A.transpose() + covs_[k - first_];
    }
    return sigma;
  }

 private:
  void require(Key k) const {
    if (!contains(k)) {
      throw TopologyError("key " + std::to_string(k) + " is not on the odometry chain");
    }
  }

  Key first_ = 0;
  std::vector<P> steps_;
  std::vector<Cov> covs_;
  std::vector<P> cumulative_;
};

enum class PcmMetric { Thresholds, Mahalanobis };

struct PcmConfig {
  double rotation_threshold = 0.01;    // rad, geodesic angle of the error transform
  double translation_threshold = 0.05;  // m, Euclidean norm of its translation
  bool use_incremental = false;
  PcmMetric metric = PcmMetric::Thresholds;
  double mahalanobis_confidence = 0.99;

  void validate() const {
    if (!(rotation_threshold > 0.0) || !(translation_threshold > 0.0)) {
      throw ConfigError("PcmConfig: thresholds must be > 0");
    }
  }
};

inline double rotation_angle(const Pose3& p) { return p.rotation().angle(); }
inline double rotation_angle(const Pose2& p) { return std::abs(p.theta()); }
inline double translation_norm(const Pose3& p) { return p.translation().norm(); }
inline double translation_norm(const Pose2& p) { return p.translation().norm(); }

namespace detail {

// Covariance of A * B for independent right perturbations.
template <PoseType P>
Matrix<P::kDof> compose_covariance(const Matrix<P::kDof>& cov_a, const P& b,
                                   const Matrix<P::kDof>& cov_b) {
  const typename P::Jacobian A = b.inverse().adjoint();
  return A * cov_a * A.transpose() + cov_b;
}

template <PoseType P>
Matrix<P::kDof> inverse_covariance(const P& a, const Matrix<P::kDof>& cov_a) {
  const typename P::Jacobian A = a.adjoint();
  return A * cov_a * A.transpose();
}

template <PoseType P>
bool error_passes(const P& error, const Matrix<P::kDof>& cov, const PcmConfig& cfg) {
  if (cfg.metric == PcmMetric::Thresholds) {
    return rotation_angle(error) <= cfg.rotation_threshold &&
           translation_norm(error) <= cfg.translation_threshold;
  }
  typename P::Tangent eps;
  try {
    eps = error.log();
  } catch (const BranchAmbiguity&) {
    return false;
  }
  const double d2 = eps.dot(cov.ldlt().solve(eps));
  return d2 <= chi2_quantile(cfg.mahalanobis_confidence, P::kDof);
}

// Error around the cycle i -a-> j -odom-> l -b^-1-> k -odom-> i.
template <PoseType P>
bool cycle_passes(const LoopCandidate<P>& a, const LoopCandidate<P>& b,
                  const OdometryChain<P>& chain, const PcmConfig& cfg) {
  const P o_jl = chain.between(a.to, b.to);
  const P o_ki = chain.between(b.from, a.from);
  const P b_inv = b.measurement.inverse();
  const P cycle = a.measurement * o_jl * b_inv * o_ki;
  Matrix<P::kDof> cov = Matrix<P::kDof>::Zero();
  if (cfg.metric == PcmMetric::Mahalanobis) {
    cov = compose_covariance(a.noise.covariance(), o_jl, chain.covariance_between(a.to, b.to));
    cov = compose_covariance(cov, b_inv, inverse_covariance(b.measurement, b.noise.covariance()));
    cov = compose_covariance(cov, o_ki, chain.covariance_between(b.from, a.from));
  }
  return error_passes(cycle, cov, cfg);
}

// Strict weak order used to break clique ties independently of insertion order.
template <PoseType P>
bool canonical_less(const LoopCandidate<P>& a, const LoopCandidate<P>& b) {
  if (a.from != b.from) return a.from < b.from;
  if (a.to != b.to) return a.to < b.to;
  const auto ma = a.measurement.matrix();
  const auto mb = b.measurement.matrix();
  for (Eigen::Index i = 0; i < ma.size(); ++i) {
    if (ma.data()[i] != mb.data()[i]) return ma.data()[i] < mb.data()[i];
  }
  return false;
}

}  // namespace detail

// Consistency of a loop closure with the odometry path between its keys.
template <PoseType P>
bool pcm_odometry_check(const LoopCandidate<P>& c, const OdometryChain<P>& chain,
                        const PcmConfig& cfg) {
  const P odom = chain.between(c.from, c.to);
  const P error = c.measurement.between(odom);
  Matrix<P::kDof> cov = Matrix<P::kDof>::Zero();
  if (cfg.metric == PcmMetric::Mahalanobis) {
    cov = detail::compose_covariance(
        detail::inverse_covariance(c.measurement, c.noise.covariance()), odom,
        chain.covariance_between(c.from, c.to));
  }
  return detail::error_passes(error, cov, cfg);
}

// The cycle error is not symmetric in translation under swapping a and b, so
// both orientations must pass.
template <PoseType P>
bool pcm_pairwise_consistent(const LoopCandidate<P>& a, const LoopCandidate<P>& b,
                             const OdometryChain<P>& chain, const PcmConfig& cfg) {
  return detail::cycle_passes(a, b, chain, cfg) && detail::cycle_passes(b, a, chain, cfg);
}

namespace detail {

template <PoseType P>
std::vector<std::size_t> clique_over(std::span<const LoopCandidate<P>> candidates,
                                     std::vector<std::size_t> survivors,
                                     const std::vector<std::vector<char>>& consistent) {
  std::stable_sort(survivors.begin(), survivors.end(), [&](std::size_t x, std::size_t y) {
    return canonical_less(candidates[x], candidates[y]);
  });
  const std::size_t n = survivors.size();
  Adjacency adj(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) adj[i][j] = consistent[survivors[i]][survivors[j]] != 0;
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t v : max_clique(adj)) out.push_back(survivors[v]);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

// Keeps the candidates that pass the odometry check and appear in a largest
// mutually consistent subset. Indices are returned ascending; each insertion
// recomputes the clique from the cached consistency matrix.
template <PoseType P>
class IncrementalPcm {
 public:
  IncrementalPcm(OdometryChain<P> chain, PcmConfig cfg) : chain_(std::move(chain)), cfg_(cfg) {
    cfg_.validate();
  }

  const std::vector<std::size_t>& add(const LoopCandidate<P>& c) {
    const std::size_t idx = candidates_.size();
    candidates_.push_back(c);
    odom_ok_.push_back(pcm_odometry_check(c, chain_, cfg_));
    for (auto& row : consistent_) row.push_back(0);
    consistent_.emplace_back(idx + 1, 0);
    if (odom_ok_[idx]) {
      for (std::size_t j = 0; j < idx; ++j) {
        if (!odom_ok_[j]) continue;
        const char ok = pcm_pairwise_consistent(candidates_[j], c, chain_, cfg_) ? 1 : 0;
        consistent_[j][idx] = ok;
        consistent_[idx][j] = ok;
      }
    }
    std::vector<std::size_t> survivors;
    for (std::size_t j = 0; j <= idx; ++j) {
      if (odom_ok_[j]) survivors.push_back(j);
    }
    inliers_ = detail::clique_over<P>(candidates_, survivors, consistent_);
    return inliers_;
  }

  const std::vector<std::size_t>& inliers() const { return inliers_; }
  const std::vector<LoopCandidate<P>>& candidates() const { return candidates_; }

 private:
  OdometryChain<P> chain_;
  PcmConfig cfg_;
  std::vector<LoopCandidate<P>> candidates_;
  std::vector<bool> odom_ok_;
  std::vector<std::vector<char>> consistent_;
  std::vector<std::size_t> inliers_;
};

template <PoseType P>
std::vector<std::size_t> pcm_select(std::span<const LoopCandidate<P>> candidates,
                                    const OdometryChain<P>& chain, const PcmConfig& cfg) {
  cfg.validate();
  if (cfg.use_incremental) {
    IncrementalPcm<P> pcm(chain, cfg);
    for (const auto& c : candidates) pcm.add(c);
    return pcm.inliers();
  }
  const std::size_t n = candidates.size();
  std::vector<std::size_t> survivors;
  for (std::size_t i = 0; i < n; ++i) {
    if (pcm_odometry_check(candidates[i], chain, cfg)) survivors.push_back(i);
  }
  std::vector<std::vector<char>> consistent(n, std::vector<char>(n, 0));
  for (std::size_t x = 0; x < survivors.size(); ++x) {
    for (std::size_t y = x + 1; y < survivors.size(); ++y) {
      const std::size_t i = survivors[x], j = survivors[y];
      const char ok = pcm_pairwise_consistent(candidates[i], candidates[j], chain, cfg) ? 1 : 0;
      consistent[i][j] = ok;
      consistent[j][i] = ok;
    }
  }
  return detail::clique_over(candidates, survivors, consistent);
}

template <PoseType P>
std::vector<std::size_t> pcm_select(const std::vector<LoopCandidate<P>>& candidates,
                                    const OdometryChain<P>& chain, const PcmConfig& cfg) {
  return pcm_select(std::span<const LoopCandidate<P>>(candidates), chain, cfg);
}

// Loop-closure factors of a graph as PCM candidates, with their factor indices.
template <PoseType P>
std::pair<std::vector<LoopCandidate<P>>, std::vector<std::size_t>> loop_candidates_of(
    const PoseGraph<P>& g) {
  std::vector<LoopCandidate<P>> cands;
  std::vector<std::size_t> idx;
  const auto& f = g.factors();
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (f[i].kind != FactorKind::LoopClosure) continue;
    cands.push_back({f[i].key1, f[i].key2, f[i].measurement, f[i].noise, std::nullopt});
    idx.push_back(i);
  }
  return {cands, idx};
}

}  // namespace rpgo
