#pragma once

#include <stdexcept>

#include "orel/state.hpp"

namespace orel {

/// Longest interval a single propagation step may cover; larger stream gaps
/// must be split by the caller.
inline constexpr double kMaxPropagationDt = 0.1;

/// Timestamped body-frame angular velocity and specific force.
struct ImuSample {
  double t = 0.0;
  Vec3 w_m{Vec3::Zero()};
  Vec3 a_m{Vec3::Zero()};
};

using Mat15 = Eigen::Matrix<double, 15, 15>;

/// First-order discrete transition matrix of the core error state,
/// F = I + A*dt with the bias-corrected sample as linearization point.
inline Mat15 transition_matrix(const FilterState& s, const ImuSample& u, double dt) {
  const Mat3 r_wi = s.core.q_wi.toRotationMatrix();
  const Vec3 w = u.w_m - s.core.b_w;
  const Vec3 a = u.a_m - s.core.b_a;

  Mat15 f = Mat15::Identity();
  f.block<3, 3>(idx::kPos, idx::kVel) = dt * Mat3::Identity();
  f.block<3, 3>(idx::kVel, idx::kAtt) = -dt * r_wi * skew(a);
  f.block<3, 3>(idx::kVel, idx::kBa) = -dt * r_wi;
  f.block<3, 3>(idx::kAtt, idx::kAtt) = Mat3::Identity() - dt * skew(w);
  f.block<3, 3>(idx::kAtt, idx::kBw) = -dt * Mat3::Identity();
  return f;
}

/// Strapdown propagation of nominal state and covariance over one IMU
/// interval. Attitude integrates the bias-corrected rate exactly (zeroth-order
/// hold); velocity and position use the midpoint attitude. Extrinsics and
/// object-world states are constant, with zero process noise.
inline void propagate(FilterState& s, MatX& cov, const ImuSample& u, double dt,
                      const ImuNoiseModel& noise) {
  if (!(dt > 0.0) || dt > kMaxPropagationDt) {
    throw std::invalid_argument("propagate: dt out of range (0, 0.1]: " + std::to_string(dt));
  }
  if (!u.w_m.allFinite() || !u.a_m.allFinite()) {
    throw std::invalid_argument("propagate: non-finite IMU sample");
  }

  const Mat15 f = transition_matrix(s, u, dt);

  // Nominal state.
  const Vec3 w = u.w_m - s.core.b_w;
  const Vec3 a = u.a_m - s.core.b_a;
  const Quat q_half = s.core.q_wi * small_angle_quat(0.5 * dt * w);
  const Vec3 a_world = q_half * a + noise.gravity;
  s.core.p_wi += dt * s.core.v_wi + 0.5 * dt * dt * a_world;
  s.core.v_wi += dt * a_world;
  s.core.q_wi = s.core.q_wi * small_angle_quat(dt * w);
  s.core.q_wi.normalize();
  s.t += dt;

  // Covariance: only the core block and its cross terms move.
  const int dim = static_cast<int>(cov.rows());
  const int rest = dim - idx::kCoreDim;
  Mat15 q = Mat15::Zero();
  q.block<3, 3>(idx::kVel, idx::kVel) = (noise.sigma_na * noise.sigma_na * dt) * Mat3::Identity();
  q.block<3, 3>(idx::kAtt, idx::kAtt) = (noise.sigma_nw * noise.sigma_nw * dt) * Mat3::Identity();
  q.block<3, 3>(idx::kBw, idx::kBw) = (noise.sigma_bw * noise.sigma_bw * dt) * Mat3::Identity();
  q.block<3, 3>(idx::kBa, idx::kBa) = (noise.sigma_ba * noise.sigma_ba * dt) * Mat3::Identity();

  const Mat15 p_core = cov.topLeftCorner(idx::kCoreDim, idx::kCoreDim);
  cov.topLeftCorner(idx::kCoreDim, idx::kCoreDim) = f * p_core * f.transpose() + q;
  if (rest > 0) {
    const MatX p_cross = cov.topRightCorner(idx::kCoreDim, rest);
    cov.topRightCorner(idx::kCoreDim, rest) = f * p_cross;
    cov.bottomLeftCorner(rest, idx::kCoreDim) = cov.topRightCorner(idx::kCoreDim, rest).transpose();
  }
  symmetrize(cov);
}

}  // namespace orel
