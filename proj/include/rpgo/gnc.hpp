// Graduated non-convexity with a truncated-least-squares cost over loop
// closures.
#pragma once

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <optional>
#include <vector>

#include "rpgo/factor_graph.hpp"
#include "rpgo/optimizer.hpp"

namespace rpgo {

inline double chi2_quantile(double confidence, int dof) {
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw ConfigError("chi2_quantile: confidence must lie in (0, 1)");
  }
  boost::math::chi_squared dist(dof);
  return boost::math::quantile(dist, confidence);
}

struct GncConfig {
  // Truncation threshold on the whitened squared residual. When unset it is
  // the chi-squared quantile at `confidence` with dof = pose dimension.
  std::optional<double> barc_sq;
  double confidence = 0.99;
  double mu_update_factor = 1.4;
  int max_outer_iterations = 100;
  double weight_convergence_eps = 1e-3;
  bool fix_odometry_weights = true;

  double threshold(int dof) const {
    const double c = barc_sq ? *barc_sq : chi2_quantile(confidence, dof);
    if (!(c > 0.0)) throw ConfigError("GncConfig: barc_sq must be > 0");
    return c;
  }

  void validate() const {
    if (barc_sq && !(*barc_sq > 0.0)) throw ConfigError("GncConfig: barc_sq must be > 0");
    if (!barc_sq && !(confidence > 0.0 && confidence < 1.0)) {
      throw ConfigError("GncConfig: confidence must lie in (0, 1)");
    }
    if (!(mu_update_factor > 1.0)) throw ConfigError("GncConfig: mu_update_factor must be > 1");
    if (max_outer_iterations < 1) throw ConfigError("GncConfig: max_outer_iterations must be >= 1");
    if (!(weight_convergence_eps > 0.0)) {
      throw ConfigError("GncConfig: weight_convergence_eps must be > 0");
    }
  }
};

struct GncState {
  double mu = 0.0;
  std::vector<double> weights;  // one per factor; pinned factors stay at 1
  int outer_iteration = 0;
};

template <PoseType P>
struct GncResult {
  OptimizeResult<P> result;
  std::vector<double> weights;
  std::vector<std::size_t> inliers;  // loop-closure factor indices with w > 0.5
  int outer_iterations = 0;
  double final_mu = 0.0;
  bool graduated = false;  // false when every loop closure started inside the convex region
};

// Truncated-least-squares weight at control parameter mu.
inline double gnc_weight_update(double r_sq, double mu, double barc_sq) {
  const double upper = (mu + 1.0) / mu * barc_sq;
  const double lower = mu / (mu + 1.0) * barc_sq;
  if (r_sq >= upper) return 0.0;
  if (r_sq <= lower) return 1.0;
  return std::sqrt(barc_sq * mu * (mu + 1.0) / r_sq) - mu;
}

constexpr double kInlierWeightCutoff = 0.5;

template <PoseType P>
GncResult<P> gnc_optimize(const PoseGraph<P>& g, const GncConfig& cfg,
                          const OptimizerConfig& opt_cfg = {}) {
  cfg.validate();
  const auto& factors = g.factors();
  std::vector<std::size_t> robust;
  for (std::size_t i = 0; i < factors.size(); ++i) {
    const FactorKind k = factors[i].kind;
    if (k == FactorKind::LoopClosure || (!cfg.fix_odometry_weights && k != FactorKind::Prior)) {
      robust.push_back(i);
    }
  }
  const auto loop_indices = g.factor_indices(FactorKind::LoopClosure);

  GncResult<P> out;
  GncState state;
  state.weights.assign(factors.size(), 1.0);
  out.result = optimize(g, g.initial_values(), state.weights, opt_cfg);
  if (robust.empty()) {
    out.weights = state.weights;
    return out;
  }

  const double barc_sq = cfg.threshold(P::kDof);
  auto residuals = [&](const Values<P>& values) {
    std::vector<double> r(robust.size());
    for (std::size_t k = 0; k < robust.size(); ++k) r[k] = chi_squared(factors[robust[k]], values);
    return r;
  };

  std::vector<double> r_sq = residuals(out.result.values);
  double r_max = 0.0;
  for (double r : r_sq) r_max = std::max(r_max, r);

  if (2.0 * r_max > barc_sq) {
    out.graduated = true;
    state.mu = barc_sq / (2.0 * r_max - barc_sq);
    while (state.outer_iteration < cfg.max_outer_iterations) {
      ++state.outer_iteration;
      double change = 0.0;
      bool binary = true;
      for (std::size_t k = 0; k < robust.size(); ++k) {
        double& w = state.weights[robust[k]];
        const double updated = gnc_weight_update(r_sq[k], state.mu, barc_sq);
        change += std::abs(updated - w);
        w = updated;
        if (w != 0.0 && w != 1.0) binary = false;
      }
      out.result = optimize(g, out.result.values, state.weights, opt_cfg);
      r_sq = residuals(out.result.values);
      // While mu < 1 the weights scale like sqrt(mu), so a small change says
      // nothing about convergence there.
      if (binary || (state.mu >= 1.0 && change < cfg.weight_convergence_eps)) break;
      state.mu *= cfg.mu_update_factor;
    }
  }

  out.weights = state.weights;
  out.outer_iterations = state.outer_iteration;
  out.final_mu = state.mu;
  for (std::size_t i : loop_indices) {
    if (out.weights[i] > kInlierWeightCutoff) out.inliers.push_back(i);
  }
  return out;
}

}  // namespace rpgo
