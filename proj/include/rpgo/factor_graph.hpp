// Pose variables, relative-pose factors and their residuals/Jacobians.
#pragma once

#include <Eigen/Cholesky>

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "rpgo/errors.hpp"
#include "rpgo/geometry.hpp"

namespace rpgo {

using Key = std::uint64_t;

template <PoseType P>
using Values = std::map<Key, P>;

enum class Dimension { SE2, SE3 };

template <PoseType P>
constexpr Dimension dimension_of() {
  return P::kDof == 3 ? Dimension::SE2 : Dimension::SE3;
}

// Gaussian noise stored as an information matrix. whiten(r) = U r with
// U^T U = information, so |whiten(r)|^2 is the Mahalanobis norm.
template <int N>
class NoiseModel {
 public:
  NoiseModel() : info_(Matrix<N>::Identity()), sqrt_info_(Matrix<N>::Identity()) {}

  static NoiseModel from_information(const Matrix<N>& info) {
    if (!info.allFinite()) throw InvalidArgument("NoiseModel: non-finite information");
    const double scale = std::max(1.0, info.cwiseAbs().maxCoeff());
    if ((info - info.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
      throw InvalidArgument("NoiseModel: information matrix is not symmetric");
    }
    const Matrix<N> sym = 0.5 * (info + info.transpose());
    Eigen::LLT<Matrix<N>> llt(sym);
    if (llt.info() != Eigen::Success) {
      throw InvalidArgument("NoiseModel: information matrix is not positive definite");
    }
    NoiseModel m;
    m.info_ = sym;
    m.sqrt_info_ = llt.matrixU();
    return m;
  }

  static NoiseModel from_sigmas(const Vector<N>& sigmas) {
    if ((sigmas.array() <= 0.0).any()) throw InvalidArgument("NoiseModel: sigmas must be > 0");
    return from_information(sigmas.array().square().inverse().matrix().asDiagonal());
  }

  static NoiseModel isotropic(double information) {
    return from_information(information * Matrix<N>::Identity());
  }

  const Matrix<N>& information() const { return info_; }
  const Matrix<N>& sqrt_information() const { return sqrt_info_; }
  Matrix<N> covariance() const { return info_.inverse(); }

  Vector<N> whiten(const Vector<N>& r) const { return sqrt_info_ * r; }
  Matrix<N> whiten(const Matrix<N>& J) const { return sqrt_info_ * J; }

  bool operator==(const NoiseModel& o) const { return info_ == o.info_; }

 private:
  Matrix<N> info_;
  Matrix<N> sqrt_info_;
};

enum class FactorKind { Prior, Odometry, LoopClosure, ExternalOdometry };

inline const char* to_string(FactorKind k) {
  switch (k) {
    case FactorKind::Prior: return "prior";
    case FactorKind::Odometry: return "odometry";
    case FactorKind::LoopClosure: return "loop_closure";
    case FactorKind::ExternalOdometry: return "external_odometry";
  }
  return "unknown";
}

// A prior (one key) or a relative-pose measurement between key1 and key2.
template <PoseType P>
struct Factor {
  using Noise = NoiseModel<P::kDof>;

  FactorKind kind = FactorKind::Prior;
  Key key1 = 0;
  Key key2 = 0;
  P measurement;
  Noise noise;

  static Factor prior(Key key, const P& z, const Noise& noise) {
    return Factor{FactorKind::Prior, key, key, z, noise};
  }
  static Factor between(FactorKind kind, Key from, Key to, const P& z, const Noise& noise) {
    if (kind == FactorKind::Prior) throw InvalidArgument("Factor::between: kind cannot be Prior");
    return Factor{kind, from, to, z, noise};
  }

  bool unary() const { return kind == FactorKind::Prior; }
};

template <PoseType P>
struct Linearization {
  typename P::Jacobian J1;  // w.r.t. key1 (whitened)
  typename P::Jacobian J2;  // w.r.t. key2 (whitened, zero for priors)
  typename P::Tangent residual;  // whitened
};

template <PoseType P>
const P& value_at(const Values<P>& values, Key key) {
  auto it = values.find(key);
  if (it == values.end()) throw KeyNotFound("no value for key " + std::to_string(key));
  return it->second;
}

// Unwhitened residual Log(z^-1 * x) for priors, Log(z^-1 * x1^-1 * x2) otherwise.
template <PoseType P>
typename P::Tangent residual(const Factor<P>& f, const Values<P>& values) {
  const P& x1 = value_at(values, f.key1);
  if (f.unary()) return f.measurement.between(x1).log();
  const P& x2 = value_at(values, f.key2);
  return f.measurement.between(x1.between(x2)).log();
}

template <PoseType P>
typename P::Tangent whitened_residual(const Factor<P>& f, const Values<P>& values) {
  return f.noise.whiten(residual(f, values));
}

template <PoseType P>
double chi_squared(const Factor<P>& f, const Values<P>& values) {
  return whitened_residual(f, values).squaredNorm();
}

// Closed-form Jacobians for right perturbations x <- x * Exp(d):
//   dr/dx2 = Jr^-1(r),  dr/dx1 = -Jr^-1(r) Ad(x2^-1 x1).
template <PoseType P>
Linearization<P> linearize(const Factor<P>& f, const Values<P>& values) {
  using Jac = typename P::Jacobian;
  Linearization<P> out;
  const P& x1 = value_at(values, f.key1);
  if (f.unary()) {
    const auto r = f.measurement.between(x1).log();
    out.J1 = f.noise.whiten(Jac(P::right_jacobian_inverse(r)));
    out.J2.setZero();
    out.residual = f.noise.whiten(r);
    return out;
  }
  const P& x2 = value_at(values, f.key2);
  const auto r = f.measurement.between(x1.between(x2)).log();
  const Jac Jinv = P::right_jacobian_inverse(r);
  out.J2 = f.noise.whiten(Jinv);
  out.J1 = f.noise.whiten(Jac(-Jinv * x2.between(x1).adjoint()));
  out.residual = f.noise.whiten(r);
  return out;
}

template <PoseType P>
class PoseGraph {
 public:
  using Pose = P;
  static constexpr Dimension kDimension = dimension_of<P>();

  void add_variable(Key key, const P& initial) {
    if (!initial_.emplace(key, initial).second) {
      throw InvalidArgument("PoseGraph: duplicate variable " + std::to_string(key));
    }
  }

  void add_factor(const Factor<P>& f) { factors_.push_back(f); }

  void add_prior(Key key, const P& z, const NoiseModel<P::kDof>& noise) {
    factors_.push_back(Factor<P>::prior(key, z, noise));
  }

  const Values<P>& initial_values() const { return initial_; }
  Values<P>& initial_values() { return initial_; }
  const std::vector<Factor<P>>& factors() const { return factors_; }
  std::vector<Factor<P>>& factors() { return factors_; }

  bool has_prior() const {
    for (const auto& f : factors_) {
      if (f.unary()) return true;
    }
    return false;
  }

  std::vector<std::size_t> factor_indices(FactorKind kind) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < factors_.size(); ++i) {
      if (factors_[i].kind == kind) out.push_back(i);
    }
    return out;
  }

  void set_allow_adjacent_loop_closures(bool allow) { allow_adjacent_loops_ = allow; }
  bool allow_adjacent_loop_closures() const { return allow_adjacent_loops_; }

  // Keys referenced by factors must be valued; loop closures must join
  // non-consecutive keys unless explicitly allowed.
  void validate() const {
    for (const auto& f : factors_) {
      value_at(initial_, f.key1);
      if (!f.unary()) value_at(initial_, f.key2);
      if (f.kind == FactorKind::LoopClosure && !allow_adjacent_loops_) {
        const Key lo = std::min(f.key1, f.key2), hi = std::max(f.key1, f.key2);
        if (hi - lo <= 1) {
          throw InvalidArgument("PoseGraph: loop closure between adjacent keys " +
                                std::to_string(lo) + " and " + std::to_string(hi));
        }
      }
    }
  }

 private:
  Values<P> initial_;
  std::vector<Factor<P>> factors_;
  bool allow_adjacent_loops_ = false;
};

// Sum over factors of w_f * |whitened residual|^2; empty weights mean all 1.
template <PoseType P>
double graph_error(const PoseGraph<P>& g, const Values<P>& values,
                   std::span<const double> weights = {}) {
  const auto& factors = g.factors();
  if (!weights.empty() && weights.size() != factors.size()) {
    throw InvalidArgument("graph_error: weight count does not match factor count");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < factors.size(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    if (w == 0.0) continue;
    total += w * chi_squared(factors[i], values);
  }
  return total;
}

}  // namespace rpgo
