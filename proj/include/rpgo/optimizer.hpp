// Gauss-Newton / Levenberg-Marquardt on the pose manifold with per-factor
// weights.
#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "rpgo/errors.hpp"
#include "rpgo/factor_graph.hpp"

namespace rpgo {

enum class Method { GaussNewton, LevenbergMarquardt };

struct OptimizerConfig {
  Method method = Method::LevenbergMarquardt;
  int max_iterations = 100;
  double abs_error_tol = 1e-10;
  double rel_error_decrease_tol = 1e-8;
  double lm_lambda_init = 1e-4;
  double lm_lambda_up_factor = 10.0;
  double lm_lambda_down_factor = 10.0;

  void validate() const {
    if (max_iterations < 0) throw ConfigError("max_iterations must be >= 0");
    if (!(abs_error_tol > 0.0) || !(rel_error_decrease_tol > 0.0)) {
      throw ConfigError("optimizer tolerances must be > 0");
    }
    if (!(lm_lambda_init > 0.0)) throw ConfigError("lm_lambda_init must be > 0");
    if (!(lm_lambda_up_factor > 1.0) || !(lm_lambda_down_factor > 1.0)) {
      throw ConfigError("LM lambda factors must be > 1");
    }
  }
};

template <PoseType P>
struct OptimizeResult {
  Values<P> values;
  double final_error = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> error_trace;  // error before the first and after each accepted step
};

// Solves (H + lambda * diag(H)) d = -b with a dense Cholesky factorization.
inline Eigen::VectorXd solve_normal_equations(const Eigen::MatrixXd& H, const Eigen::VectorXd& b,
                                              double lambda) {
  if (H.rows() != H.cols() || H.rows() != b.size()) {
    throw InvalidArgument("solve_normal_equations: dimension mismatch");
  }
  const double scale = std::max(1.0, H.cwiseAbs().maxCoeff());
  if ((H - H.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw InvalidArgument("solve_normal_equations: H is not symmetric");
  }
  Eigen::MatrixXd A = H;
  A.diagonal() += lambda * H.diagonal();
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() != Eigen::Success) throw NumericalFailure("normal matrix is not positive definite");
  return llt.solve(-b);
}

inline Eigen::VectorXd solve_normal_equations(const Eigen::SparseMatrix<double>& H,
                                              const Eigen::VectorXd& b, double lambda) {
  Eigen::SparseMatrix<double> A = H;
  for (int k = 0; k < A.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it) {
      if (it.row() == it.col()) it.valueRef() *= (1.0 + lambda);
    }
  }
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(A);
  if (llt.info() != Eigen::Success) throw NumericalFailure("normal matrix is not positive definite");
  Eigen::VectorXd d = llt.solve(-b);
  if (llt.info() != Eigen::Success || !d.allFinite()) {
    throw NumericalFailure("normal equation solve failed");
  }
  return d;
}

namespace detail {

template <PoseType P>
class NormalEquations {
 public:
  static constexpr int N = P::kDof;

  NormalEquations(const PoseGraph<P>& g, std::span<const double> weights)
      : graph_(g), weights_(weights) {
    int idx = 0;
    for (const auto& [key, pose] : g.initial_values()) offsets_.emplace(key, N * idx++);
    dim_ = N * idx;
  }

  int dim() const { return dim_; }

  void build(const Values<P>& values, Eigen::SparseMatrix<double>& H, Eigen::VectorXd& b) const {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(graph_.factors().size() * 4 * N * N);
    b = Eigen::VectorXd::Zero(dim_);
    const auto& factors = graph_.factors();
    for (std::size_t i = 0; i < factors.size(); ++i) {
      const double w = weights_.empty() ? 1.0 : weights_[i];
      if (w == 0.0) continue;
      const auto& f = factors[i];
      const auto lin = linearize(f, values);
      const int o1 = offset(f.key1);
      add_block(trip, o1, o1, w * lin.J1.transpose() * lin.J1);
      b.segment<N>(o1) += w * lin.J1.transpose() * lin.residual;
      if (f.unary()) continue;
      const int o2 = offset(f.key2);
      add_block(trip, o2, o2, w * lin.J2.transpose() * lin.J2);
      add_block(trip, o1, o2, w * lin.J1.transpose() * lin.J2);
      add_block(trip, o2, o1, w * lin.J2.transpose() * lin.J1);
      b.segment<N>(o2) += w * lin.J2.transpose() * lin.residual;
    }
    H.resize(dim_, dim_);
    H.setFromTriplets(trip.begin(), trip.end());
  }

  Values<P> retract(const Values<P>& values, const Eigen::VectorXd& delta) const {
    Values<P> out;
    for (const auto& [key, pose] : values) {
      auto it = offsets_.find(key);
      if (it == offsets_.end()) {
        out.emplace_hint(out.end(), key, pose);
        continue;
      }
      const typename P::Tangent d = delta.segment<N>(it->second);
      out.emplace_hint(out.end(), key, pose * P::exp(d));
    }
    return out;
  }

 private:
  int offset(Key k) const {
    auto it = offsets_.find(k);
    if (it == offsets_.end()) throw KeyNotFound("no variable for key " + std::to_string(k));
    return it->second;
  }

  static void add_block(std::vector<Eigen::Triplet<double>>& trip, int r, int c,
                        const typename P::Jacobian& M) {
    for (int j = 0; j < N; ++j) {
      for (int i = 0; i < N; ++i) trip.emplace_back(r + i, c + j, M(i, j));
    }
  }

  const PoseGraph<P>& graph_;
  std::span<const double> weights_;
  std::map<Key, int> offsets_;
  int dim_ = 0;
};

inline void check_weights(std::span<const double> weights, std::size_t factor_count) {
  if (weights.empty()) return;
  if (weights.size() != factor_count) {
    throw InvalidArgument("optimize: weight count does not match factor count");
  }
  for (double w : weights) {
    if (!(w >= 0.0 && w <= 1.0)) throw InvalidArgument("optimize: weights must lie in [0, 1]");
  }
}

}  // namespace detail

// Minimizes sum_f w_f |whitened residual_f|^2 starting from `initial`.
// Variables are ordered by key; the sparse Cholesky applies its own
// fill-reducing permutation.
template <PoseType P>
OptimizeResult<P> optimize(const PoseGraph<P>& g, const Values<P>& initial,
                           std::span<const double> weights, const OptimizerConfig& cfg) {
  cfg.validate();
  detail::check_weights(weights, g.factors().size());
  if (!g.has_prior()) throw ConfigError("optimize: graph has no prior factor (gauge is free)");
  g.validate();
  for (const auto& [key, pose] : g.initial_values()) value_at(initial, key);

  detail::NormalEquations<P> ne(g, weights);
  OptimizeResult<P> res;
  res.values = initial;
  double err = graph_error(g, res.values, weights);
  res.error_trace.push_back(err);
  if (!std::isfinite(err)) throw NumericalFailure("optimize: non-finite initial error");

  const bool lm = cfg.method == Method::LevenbergMarquardt;
  double lambda = lm ? cfg.lm_lambda_init : 0.0;
  Eigen::SparseMatrix<double> H;
  Eigen::VectorXd b;

  while (true) {
    if (err < cfg.abs_error_tol) {
      res.converged = true;
      break;
    }
    if (res.iterations >= cfg.max_iterations) break;

    ne.build(res.values, H, b);
    Values<P> candidate;
    double new_err = err;
    bool accepted = false;
    if (!lm) {
      candidate = ne.retract(res.values, solve_normal_equations(H, b, 0.0));
      new_err = graph_error(g, candidate, weights);
      if (!std::isfinite(new_err)) {
        throw NumericalFailure("optimize: Gauss-Newton step produced non-finite error");
      }
      // An undamped step that increases the error ends the solve.
      if (new_err > err) break;
    } else {
      while (lambda < 1e12) {
        Eigen::VectorXd delta;
        try {
          delta = solve_normal_equations(H, b, lambda);
        } catch (const NumericalFailure&) {
          lambda *= cfg.lm_lambda_up_factor;
          continue;
        }
        candidate = ne.retract(res.values, delta);
        new_err = graph_error(g, candidate, weights);
        if (std::isfinite(new_err) && new_err <= err) {
          accepted = true;
          lambda = std::max(lambda / cfg.lm_lambda_down_factor, 1e-12);
          break;
        }
        lambda *= cfg.lm_lambda_up_factor;
      }
      if (!accepted) {
        // No descent direction left at any damping: either a local minimum
        // or a singular system.
        Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> probe(H);
        if (probe.info() != Eigen::Success) {
          throw NumericalFailure("optimize: normal matrix is singular after damping");
        }
        res.converged = true;
        break;
      }
    }

    ++res.iterations;
    res.values = std::move(candidate);
    const double prev = err;
    err = new_err;
    res.error_trace.push_back(err);
    if (err < cfg.abs_error_tol || (prev - err) < cfg.rel_error_decrease_tol * prev) {
      res.converged = true;
      break;
    }
  }
  res.final_error = err;
  return res;
}

template <PoseType P>
OptimizeResult<P> optimize(const PoseGraph<P>& g, std::span<const double> weights = {},
                           const OptimizerConfig& cfg = {}) {
  return optimize(g, g.initial_values(), weights, cfg);
}

}  // namespace rpgo
