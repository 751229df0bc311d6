// Lie-group substrate: SO(3), SE(3) and SE(2).
//
// Tangent vectors are always ordered rotation first: [omega; v] for SE(3)
// (6-vector) and [theta; vx; vy] for SE(2) (3-vector). Perturbations are
// applied on the right, x <- x * Exp(delta), everywhere in the library.
#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <concepts>
#include <numbers>

#include "rpgo/errors.hpp"

namespace rpgo {

template <int N>
using Vector = Eigen::Matrix<double, N, 1>;
template <int N>
using Matrix = Eigen::Matrix<double, N, N>;

using Vector2 = Vector<2>;
using Vector3 = Vector<3>;
using Matrix2 = Matrix<2>;
using Matrix3 = Matrix<3>;
using Matrix4 = Matrix<4>;
using Tangent3 = Vector<3>;
using Tangent6 = Vector<6>;

namespace detail {

template <class Derived>
inline void require_finite(const Eigen::MatrixBase<Derived>& v, const char* what) {
  if (!v.allFinite()) throw InvalidArgument(std::string(what) + ": non-finite input");
}

inline double wrap_angle(double theta) {
  double r = std::remainder(theta, 2.0 * std::numbers::pi);
  return r == -std::numbers::pi ? std::numbers::pi : r;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// SO(3) helpers on rotation vectors.
// ---------------------------------------------------------------------------
namespace so3 {

inline Matrix3 hat(const Vector3& w) {
  Matrix3 m;
  // clang-format off
  m <<    0.0, -w.z(),  w.y(),
        w.z(),    0.0, -w.x(),
       -w.y(),  w.x(),    0.0;
  // clang-format on
  return m;
}

// J_l(w) = I + a hat(w) + b hat(w)^2
inline Matrix3 left_jacobian(const Vector3& w) {
  const double th2 = w.squaredNorm();
  const double th = std::sqrt(th2);
  double a, b;
  if (th < 1e-4) {
    a = 0.5 - th2 / 24.0;
    b = 1.0 / 6.0 - th2 / 120.0;
  } else {
    a = (1.0 - std::cos(th)) / th2;
    b = (th - std::sin(th)) / (th2 * th);
  }
  const Matrix3 W = hat(w);
  return Matrix3::Identity() + a * W + b * W * W;
}

inline Matrix3 left_jacobian_inverse(const Vector3& w) {
  const double th2 = w.squaredNorm();
  const double th = std::sqrt(th2);
  double c;
  if (th < 1e-4) {
    c = 1.0 / 12.0 + th2 / 720.0;
  } else {
    c = 1.0 / th2 - (1.0 + std::cos(th)) / (2.0 * th * std::sin(th));
  }
  const Matrix3 W = hat(w);
  return Matrix3::Identity() - 0.5 * W + c * W * W;
}

inline Matrix3 right_jacobian(const Vector3& w) { return left_jacobian(-w); }
inline Matrix3 right_jacobian_inverse(const Vector3& w) { return left_jacobian_inverse(-w); }

}  // namespace so3

// ---------------------------------------------------------------------------
// Rotation3: unit quaternion, canonical w >= 0.
// ---------------------------------------------------------------------------
class Rotation3 {
 public:
  Rotation3() : q_(1.0, 0.0, 0.0, 0.0) {}

  // Normalizes only when the norm is off by more than 1e-12 so that values
  // already on the unit sphere keep their exact bits.
  static Rotation3 from_quaternion(double w, double x, double y, double z) {
    Eigen::Quaterniond q(w, x, y, z);
    detail::require_finite(q.coeffs(), "Rotation3");
    const double n = q.norm();
    if (n < 1e-300) throw InvalidArgument("Rotation3: zero quaternion");
    return Rotation3(q, Unchecked{});
  }

  static Rotation3 from_matrix(const Matrix3& R) {
    detail::require_finite(R, "Rotation3");
    Eigen::Quaterniond q(R);
    return Rotation3(q, Unchecked{});
  }

  static Rotation3 exp(const Vector3& w) {
    detail::require_finite(w, "Rotation3::exp");
    const double th2 = w.squaredNorm();
    const double th = std::sqrt(th2);
    Eigen::Quaterniond q;
    if (th < 1e-6) {
      const double s = 0.5 * (1.0 - th2 / 24.0);
      q = Eigen::Quaterniond(1.0 - th2 / 8.0, s * w.x(), s * w.y(), s * w.z());
    } else {
      const double s = std::sin(0.5 * th) / th;
      q = Eigen::Quaterniond(std::cos(0.5 * th), s * w.x(), s * w.y(), s * w.z());
    }
    return Rotation3(q, Unchecked{});
  }

  static Rotation3 yaw(double angle) { return exp(Vector3(0.0, 0.0, angle)); }

  // Principal-branch logarithm. Throws BranchAmbiguity for angles within
  // 1e-9 of pi.
  Vector3 log() const {
    const Vector3 v = q_.vec();
    const double n = v.norm();
    const double w = q_.w();
    const double th = 2.0 * std::atan2(n, w);
    if (th >= std::numbers::pi - 1e-9) {
      throw BranchAmbiguity("Rotation3::log: angle at pi boundary");
    }
    if (n < 1e-8) {
      return (2.0 / w) * (1.0 - n * n / (3.0 * w * w)) * v;
    }
    return (th / n) * v;
  }

  double angle() const { return 2.0 * std::atan2(q_.vec().norm(), q_.w()); }

  Rotation3 operator*(const Rotation3& o) const { return Rotation3(q_ * o.q_, Unchecked{}); }
  Vector3 operator*(const Vector3& p) const { return q_ * p; }
  Rotation3 inverse() const { return Rotation3(q_.conjugate(), Unchecked{}); }

  Matrix3 matrix() const { return q_.toRotationMatrix(); }
  const Eigen::Quaterniond& quaternion() const { return q_; }
  double w() const { return q_.w(); }
  double x() const { return q_.x(); }
  double y() const { return q_.y(); }
  double z() const { return q_.z(); }

  bool operator==(const Rotation3& o) const { return q_.coeffs() == o.q_.coeffs(); }

 private:
  struct Unchecked {};
  Rotation3(Eigen::Quaterniond q, Unchecked) : q_(q) {
    const double n = q_.norm();
    if (std::abs(n - 1.0) > 1e-12) q_.coeffs() /= n;
    canonicalize();
  }

  void canonicalize() {
    auto& c = q_.coeffs();  // x y z w
    if (c[3] < 0.0 || (c[3] == 0.0 && first_nonzero_negative())) c = -c;
  }

  bool first_nonzero_negative() const {
    const auto& c = q_.coeffs();
    for (int i = 0; i < 3; ++i) {
      if (c[i] != 0.0) return c[i] < 0.0;
    }
    return false;
  }

  Eigen::Quaterniond q_;
};

// ---------------------------------------------------------------------------
// Pose3: element of SE(3).
// ---------------------------------------------------------------------------
class Pose3 {
 public:
  static constexpr int kDof = 6;
  using Tangent = Tangent6;
  using Jacobian = Matrix<6>;

  Pose3() : t_(Vector3::Zero()) {}
  Pose3(const Rotation3& r, const Vector3& t) : r_(r), t_(t) {}

  static Pose3 identity() { return Pose3(); }
  static Pose3 from_matrix(const Matrix4& T) {
    return Pose3(Rotation3::from_matrix(T.topLeftCorner<3, 3>()), T.topRightCorner<3, 1>());
  }

  static Pose3 exp(const Tangent& xi) {
    detail::require_finite(xi, "Pose3::exp");
    const Vector3 w = xi.head<3>();
    const Vector3 v = xi.tail<3>();
    return Pose3(Rotation3::exp(w), so3::left_jacobian(w) * v);
  }

  Tangent log() const {
    detail::require_finite(t_, "Pose3::log");
    const Vector3 w = r_.log();
    Tangent xi;
    xi << w, so3::left_jacobian_inverse(w) * t_;
    return xi;
  }

  Pose3 operator*(const Pose3& o) const { return Pose3(r_ * o.r_, t_ + r_ * o.t_); }
  Vector3 operator*(const Vector3& p) const { return r_ * p + t_; }

  Pose3 inverse() const {
    const Rotation3 ri = r_.inverse();
    return Pose3(ri, -(ri * t_));
  }

  Pose3 between(const Pose3& o) const {
    const Rotation3 ri = r_.inverse();
    return Pose3(ri * o.r_, ri * (o.t_ - t_));
  }

  // Ad(T) with [omega; v] ordering: [[R, 0], [t^ R, R]].
  Jacobian adjoint() const {
    const Matrix3 R = r_.matrix();
    Jacobian A = Jacobian::Zero();
    A.topLeftCorner<3, 3>() = R;
    A.bottomRightCorner<3, 3>() = R;
    A.bottomLeftCorner<3, 3>() = so3::hat(t_) * R;
    return A;
  }

  static Jacobian left_jacobian(const Tangent& xi);
  static Jacobian right_jacobian(const Tangent& xi) { return left_jacobian(-xi); }
  static Jacobian right_jacobian_inverse(const Tangent& xi);

  Matrix4 matrix() const {
    Matrix4 T = Matrix4::Identity();
    T.topLeftCorner<3, 3>() = r_.matrix();
    T.topRightCorner<3, 1>() = t_;
    return T;
  }

  const Rotation3& rotation() const { return r_; }
  const Vector3& translation() const { return t_; }
  Vector3 position() const { return t_; }

  bool operator==(const Pose3& o) const { return r_ == o.r_ && t_ == o.t_; }

 private:
  Rotation3 r_;
  Vector3 t_;
};

namespace detail {

// Translation/rotation coupling block of the SE(3) left Jacobian.
inline Matrix3 se3_q_block(const Vector3& w, const Vector3& v) {
  const double th2 = w.squaredNorm();
  const double th = std::sqrt(th2);
  double a, b, c;
  if (th < 1e-2) {
    a = 1.0 / 6.0 - th2 / 120.0;
    b = 1.0 / 24.0 - th2 / 720.0;
    c = 1.0 / 120.0 - th2 / 2520.0;
  } else {
    const double s = std::sin(th), co = std::cos(th);
    const double th4 = th2 * th2;
    a = (th - s) / (th2 * th);
    b = (th2 + 2.0 * co - 2.0) / (2.0 * th4);
    c = (2.0 * th - 3.0 * s + th * co) / (2.0 * th4 * th);
  }
  const Matrix3 W = so3::hat(w);
  const Matrix3 V = so3::hat(v);
  const Matrix3 WV = W * V;
  const Matrix3 VW = V * W;
  const Matrix3 WVW = WV * W;
  return 0.5 * V + a * (WV + VW + WVW) + b * (W * WV + VW * W - 3.0 * WVW) +
         c * (WVW * W + W * WVW);
}

}  // namespace detail

inline Pose3::Jacobian Pose3::left_jacobian(const Tangent& xi) {
  const Vector3 w = xi.head<3>();
  const Vector3 v = xi.tail<3>();
  const Matrix3 J = so3::left_jacobian(w);
  Jacobian out = Jacobian::Zero();
  out.topLeftCorner<3, 3>() = J;
  out.bottomRightCorner<3, 3>() = J;
  out.bottomLeftCorner<3, 3>() = detail::se3_q_block(w, v);
  return out;
}

inline Pose3::Jacobian Pose3::right_jacobian_inverse(const Tangent& xi) {
  const Vector3 w = -xi.head<3>();
  const Vector3 v = -xi.tail<3>();
  const Matrix3 Jinv = so3::left_jacobian_inverse(w);
  const Matrix3 Q = detail::se3_q_block(w, v);
  Jacobian out = Jacobian::Zero();
  out.topLeftCorner<3, 3>() = Jinv;
  out.bottomRightCorner<3, 3>() = Jinv;
  out.bottomLeftCorner<3, 3>() = -Jinv * Q * Jinv;
  return out;
}

// ---------------------------------------------------------------------------
// Pose2: element of SE(2), heading wrapped to (-pi, pi].
// ---------------------------------------------------------------------------
class Pose2 {
 public:
  static constexpr int kDof = 3;
  using Tangent = Tangent3;
  using Jacobian = Matrix<3>;

  Pose2() : theta_(0.0), t_(Vector2::Zero()) {}
  Pose2(double x, double y, double theta) : theta_(detail::wrap_angle(theta)), t_(x, y) {}
  Pose2(const Vector2& t, double theta) : theta_(detail::wrap_angle(theta)), t_(t) {}

  static Pose2 identity() { return Pose2(); }

  static Pose2 exp(const Tangent& xi) {
    detail::require_finite(xi, "Pose2::exp");
    const double th = xi[0];
    return Pose2(v_matrix(th) * xi.tail<2>(), th);
  }

  Tangent log() const {
    Tangent xi;
    xi[0] = theta_;
    xi.tail<2>() = v_matrix(theta_).inverse() * t_;
    return xi;
  }

  Pose2 operator*(const Pose2& o) const { return Pose2(t_ + rot() * o.t_, theta_ + o.theta_); }
  Vector2 operator*(const Vector2& p) const { return rot() * p + t_; }
  Pose2 inverse() const { return Pose2(-(rot().transpose() * t_), -theta_); }
  Pose2 between(const Pose2& o) const {
    return Pose2(rot().transpose() * (o.t_ - t_), o.theta_ - theta_);
  }

  // Ad(T) with [theta; v] ordering.
  Jacobian adjoint() const {
    Jacobian A = Jacobian::Zero();
    A(0, 0) = 1.0;
    A(1, 0) = t_.y();
    A(2, 0) = -t_.x();
    A.bottomRightCorner<2, 2>() = rot();
    return A;
  }

  static Jacobian right_jacobian(const Tangent& xi) {
    const double th = xi[0];
    const double r1 = xi[1], r2 = xi[2];
    Jacobian J = Jacobian::Zero();
    J(0, 0) = 1.0;
    double sa, ca, c1, c2;  // sin(th)/th, (1-cos(th))/th, coupling column
    if (std::abs(th) < 1e-4) {
      sa = 1.0 - th * th / 6.0;
      ca = th / 2.0 - th * th * th / 24.0;
      c1 = -r2 / 2.0 + r1 * th / 6.0;
      c2 = r1 / 2.0 + r2 * th / 6.0;
    } else {
      const double s = std::sin(th), c = std::cos(th), th2 = th * th;
      sa = s / th;
      ca = (1.0 - c) / th;
      c1 = (th * r1 - r2 * (1.0 - c) - r1 * s) / th2;
      c2 = (r1 * (1.0 - c) + th * r2 - r2 * s) / th2;
    }
    J(1, 0) = c1;
    J(2, 0) = c2;
    J(1, 1) = sa;
    J(1, 2) = ca;
    J(2, 1) = -ca;
    J(2, 2) = sa;
    return J;
  }

  static Jacobian right_jacobian_inverse(const Tangent& xi) {
    const Jacobian J = right_jacobian(xi);
    const Matrix2 Ainv = J.bottomRightCorner<2, 2>().inverse();
    Jacobian out = Jacobian::Zero();
    out(0, 0) = 1.0;
    out.bottomRightCorner<2, 2>() = Ainv;
    out.bottomLeftCorner<2, 1>() = -Ainv * J.bottomLeftCorner<2, 1>();
    return out;
  }

  Matrix3 matrix() const {
    Matrix3 T = Matrix3::Identity();
    T.topLeftCorner<2, 2>() = rot();
    T.topRightCorner<2, 1>() = t_;
    return T;
  }

  double theta() const { return theta_; }
  double x() const { return t_.x(); }
  double y() const { return t_.y(); }
  const Vector2& translation() const { return t_; }
  Vector3 position() const { return Vector3(t_.x(), t_.y(), 0.0); }
  Matrix2 rot() const {
    const double c = std::cos(theta_), s = std::sin(theta_);
    Matrix2 R;
    R << c, -s, s, c;
    return R;
  }

  bool operator==(const Pose2& o) const { return theta_ == o.theta_ && t_ == o.t_; }

 private:
  static Matrix2 v_matrix(double th) {
    double sa, ca;
    if (std::abs(th) < 1e-6) {
      sa = 1.0 - th * th / 6.0;
      ca = th / 2.0 - th * th * th / 24.0;
    } else {
      sa = std::sin(th) / th;
      ca = (1.0 - std::cos(th)) / th;
    }
    Matrix2 V;
    V << sa, -ca, ca, sa;
    return V;
  }

  double theta_;
  Vector2 t_;
};

// ---------------------------------------------------------------------------
// Generic operations.
// ---------------------------------------------------------------------------
template <class P>
concept PoseType = requires(const P& a, const typename P::Tangent& xi) {
  { P::kDof } -> std::convertible_to<int>;
  { P::exp(xi) } -> std::same_as<P>;
  { a.log() } -> std::same_as<typename P::Tangent>;
  { a * a } -> std::same_as<P>;
  { a.inverse() } -> std::same_as<P>;
  { a.between(a) } -> std::same_as<P>;
  { a.adjoint() } -> std::same_as<typename P::Jacobian>;
  { P::right_jacobian_inverse(xi) } -> std::same_as<typename P::Jacobian>;
  { a.position() } -> std::same_as<Vector3>;
};

template <PoseType P>
P exp_map(const typename P::Tangent& xi) {
  return P::exp(xi);
}

template <PoseType P>
typename P::Tangent log_map(const P& p) {
  return p.log();
}

template <PoseType P>
P compose(const P& a, const P& b) {
  return a * b;
}

template <PoseType P>
P inverse(const P& p) {
  return p.inverse();
}

template <PoseType P>
P between(const P& a, const P& b) {
  return a.between(b);
}

// Geodesic interpolation a * Exp(t * Log(a^-1 b)).
template <PoseType P>
P interpolate(const P& a, const P& b, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw InvalidArgument("interpolate: t outside [0, 1]");
  if (t == 0.0) return a;
  if (t == 1.0) return b;
  return a * P::exp(t * a.between(b).log());
}

// Projection of a 3D pose onto the plane (x, y, yaw) and the planar lift.
inline Pose2 to_pose2(const Pose3& p) {
  const Matrix3 R = p.rotation().matrix();
  return Pose2(p.translation().x(), p.translation().y(), std::atan2(R(1, 0), R(0, 0)));
}

inline Pose3 to_pose3(const Pose2& p) {
  return Pose3(Rotation3::yaw(p.theta()), Vector3(p.x(), p.y(), 0.0));
}

}  // namespace rpgo
