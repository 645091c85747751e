#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <cmath>
#include <optional>

namespace orel {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

/// Hamilton quaternion, coefficients stored (x, y, z, w).
using Quat = Eigen::Quaterniond;

/// Rotation errors with |q_w| below this are unusable as 2*q_v/q_w residuals
/// (rotation near 180 deg).
inline constexpr double kResidualMinW = 0.01;

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
      -v.y(), v.x(), 0.0;
  return m;
}

/// Flips the sign so that q_w >= 0; both signs encode the same rotation.
inline Quat canonicalized(const Quat& q) {
  if (q.w() < 0.0) {
    return Quat(-q.w(), -q.x(), -q.y(), -q.z());
  }
  return q;
}

inline Quat quat_multiply(const Quat& a, const Quat& b) {
  Quat q = a * b;
  q.normalize();
  return q;
}

inline Mat3 quat_to_rotmat(const Quat& q) { return q.toRotationMatrix(); }

/// Quaternion multiplication matrix: q_dot = 0.5 * omega_matrix(w) * q for a
/// body-frame angular rate w, with q stacked as (x, y, z, w).
inline Mat4 omega_matrix(const Vec3& w) {
  Mat4 m;
  m.topLeftCorner<3, 3>() = -skew(w);
  m.topRightCorner<3, 1>() = w;
  m.bottomLeftCorner<1, 3>() = -w.transpose();
  m(3, 3) = 0.0;
  return m;
}

/// Exponential map: rotation vector -> unit quaternion. Exact for any angle;
/// series fallback keeps theta -> 0 well conditioned.
inline Quat small_angle_quat(const Vec3& theta) {
  const double t2 = theta.squaredNorm();
  if (t2 < 1e-20) {
    Quat q(1.0, 0.5 * theta.x(), 0.5 * theta.y(), 0.5 * theta.z());
    q.normalize();
    return q;
  }
  const double t = std::sqrt(t2);
  const double s = std::sin(0.5 * t) / t;
  return Quat(std::cos(0.5 * t), s * theta.x(), s * theta.y(), s * theta.z());
}

/// Logarithm map: unit quaternion -> rotation vector, shortest arc.
inline Vec3 rotation_vector(const Quat& q_in) {
  const Quat q = canonicalized(q_in);
  const double vn = q.vec().norm();
  if (vn < 1e-12) {
    return 2.0 * q.vec();
  }
  const double angle = 2.0 * std::atan2(vn, q.w());
  return (angle / vn) * q.vec();
}

inline double rotation_angle(const Quat& q) { return rotation_vector(q).norm(); }

/// Small-rotation residual 2*q_v/q_w. Returns nullopt when the error is near
/// 180 deg (|q_w| < kResidualMinW after sign canonicalization), which marks
/// the measurement unusable.
inline std::optional<Vec3> quat_residual_to_rotvec(const Quat& q_err) {
  const Quat q = canonicalized(q_err);
  if (q.w() < kResidualMinW) {
    return std::nullopt;
  }
  return Vec3(2.0 * q.vec() / q.w());
}

/// Rigid transform T_AB = (p_AB, q_AB): frame B with respect to frame A.
struct Pose {
  Vec3 p{Vec3::Zero()};
  Quat q{Quat::Identity()};

  static Pose Identity() { return Pose{}; }

  /// Composition T_AC = T_AB * T_BC.
  Pose operator*(const Pose& other) const {
    return Pose{p + q * other.p, quat_multiply(q, other.q)};
  }

  Pose inverse() const {
    const Quat qi = q.conjugate();
    return Pose{-(qi * p), qi};
  }

  Mat3 rotation() const { return q.toRotationMatrix(); }
};

}  // namespace orel
