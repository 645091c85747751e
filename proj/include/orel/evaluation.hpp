#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/SVD>

#include "orel/trajectory.hpp"

namespace orel {

struct PairedSample {
  double t_est = 0.0;
  double t_gt = 0.0;
  Pose est;
  Pose gt;
};

/// Nearest-neighbor timestamp association; pairs farther apart than max_dt
/// are dropped. Throws when nothing pairs up (e.g. disjoint time ranges).
inline std::vector<PairedSample> associate(const Trajectory& est, const Trajectory& gt,
                                           double max_dt) {
  if (!(max_dt > 0.0)) throw std::invalid_argument("associate: max_dt must be positive");
  if (est.empty() || gt.empty()) throw std::runtime_error("associate: empty trajectory");
  for (size_t i = 1; i < gt.size(); ++i) {
    if (!(gt[i].t > gt[i - 1].t)) throw std::invalid_argument("associate: trajectory not time-sorted");
  }
  for (size_t i = 1; i < est.size(); ++i) {
    if (!(est[i].t > est[i - 1].t)) throw std::invalid_argument("associate: trajectory not time-sorted");
  }
  std::vector<PairedSample> pairs;
  size_t j = 0;
  for (const TimedPose& e : est) {
    while (j + 1 < gt.size() && std::abs(gt[j + 1].t - e.t) <= std::abs(gt[j].t - e.t)) {
      ++j;
    }
    if (std::abs(gt[j].t - e.t) > max_dt) continue;
    pairs.push_back(PairedSample{e.t, gt[j].t, e.pose, gt[j].pose});
  }
  if (pairs.empty()) {
    throw std::runtime_error("associate: no samples paired within max_dt");
  }
  return pairs;
}

struct Alignment {
  Pose transform;     // maps estimate into the ground-truth frame
  double scale = 1.0; // 1 unless solved with scale
};

inline Pose apply_alignment(const Alignment& a, const Pose& est) {
  return Pose{a.scale * (a.transform.q * est.p) + a.transform.p,
              quat_multiply(a.transform.q, est.q)};
}

/// Closed-form least-squares rigid alignment (rotation + translation,
/// optionally scale) of the estimated positions onto ground truth via the
/// cross-covariance SVD. Throws on degenerate (collinear) geometry.
inline Alignment align_se3(const std::vector<PairedSample>& pairs, bool with_scale = false) {
  if (pairs.size() < 3) {
    throw std::invalid_argument("align_se3: need at least 3 paired samples");
  }
  const double n = static_cast<double>(pairs.size());
  Vec3 mean_est = Vec3::Zero(), mean_gt = Vec3::Zero();
  for (const auto& p : pairs) {
    mean_est += p.est.p;
    mean_gt += p.gt.p;
  }
  mean_est /= n;
  mean_gt /= n;

  Mat3 cross = Mat3::Zero();
  double var_est = 0.0;
  for (const auto& p : pairs) {
    cross += (p.gt.p - mean_gt) * (p.est.p - mean_est).transpose();
    var_est += (p.est.p - mean_est).squaredNorm();
  }
  cross /= n;
  var_est /= n;

  Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  if (sv(1) <= 1e-12 * std::max(sv(0), 1e-300)) {
    throw std::runtime_error("align_se3: degenerate geometry (positions collinear)");
  }
  Vec3 d = Vec3::Ones();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) {
    d(2) = -1.0;
  }
  const Mat3 rot = svd.matrixU() * d.asDiagonal() * svd.matrixV().transpose();

  Alignment a;
  a.transform.q = Quat(rot).normalized();
  if (with_scale) {
    if (!(var_est > 0.0)) {
      throw std::runtime_error("align_se3: zero spread, scale unrecoverable");
    }
    a.scale = sv.dot(d) / var_est;
  }
  a.transform.p = mean_gt - a.scale * (rot * mean_est);
  return a;
}

/// z-y-x Euler angles (roll, pitch, yaw) of a rotation matrix. Pitch is
/// clamped to +-90 deg; at the gimbal singularity roll is set to zero and the
/// remaining rotation is folded into yaw.
inline Vec3 euler_zyx(const Mat3& r) {
  const double sp = std::clamp(-r(2, 0), -1.0, 1.0);
  const double pitch = std::asin(sp);
  if (std::abs(sp) > 1.0 - 1e-12) {
    return Vec3(0.0, pitch, std::atan2(-r(0, 1), r(1, 1)));
  }
  return Vec3(std::atan2(r(2, 1), r(2, 2)), pitch, std::atan2(r(1, 0), r(0, 0)));
}

struct RmseReport {
  Vec3 pos_rmse{Vec3::Zero()};        // per axis [m]
  Vec3 euler_rmse_deg{Vec3::Zero()};  // roll, pitch, yaw [deg]
  int n_samples = 0;
};

/// Per-axis position RMSE and per-axis Euler RMSE of the per-sample relative
/// rotation between aligned estimate and ground truth.
inline RmseReport rmse(const std::vector<PairedSample>& pairs, const Alignment& alignment) {
  if (pairs.empty()) throw std::invalid_argument("rmse: empty pairing");
  Vec3 pos_sq = Vec3::Zero();
  Vec3 ang_sq = Vec3::Zero();
  for (const auto& p : pairs) {
    const Pose aligned = apply_alignment(alignment, p.est);
    const Vec3 dp = aligned.p - p.gt.p;
    pos_sq += dp.cwiseProduct(dp);
    const Quat q_rel = p.gt.q.conjugate() * aligned.q;
    const Vec3 e = euler_zyx(q_rel.toRotationMatrix());
    ang_sq += e.cwiseProduct(e);
  }
  RmseReport rep;
  rep.n_samples = static_cast<int>(pairs.size());
  rep.pos_rmse = (pos_sq / pairs.size()).cwiseSqrt();
  rep.euler_rmse_deg = (ang_sq / pairs.size()).cwiseSqrt() * (180.0 / M_PI);
  return rep;
}

/// First time offset (relative to the start of the history) after which the
/// pose stays within the tolerances for the remainder. nullopt if it never
/// settles.
inline std::optional<double> convergence_time(const std::vector<TimedPose>& history,
                                              const Pose& truth, double pos_tol,
                                              double ang_tol) {
  if (history.empty()) throw std::invalid_argument("convergence_time: empty history");
  const auto violates = [&](const TimedPose& s) {
    const double pos_err = (s.pose.p - truth.p).norm();
    const double ang_err = rotation_angle(truth.q.conjugate() * s.pose.q);
    return pos_err > pos_tol || ang_err > ang_tol;
  };
  int last_violation = -1;
  for (int i = static_cast<int>(history.size()) - 1; i >= 0; --i) {
    if (violates(history[i])) {
      last_violation = i;
      break;
    }
  }
  if (last_violation < 0) return 0.0;
  if (last_violation + 1 >= static_cast<int>(history.size())) return std::nullopt;
  return history[last_violation + 1].t - history.front().t;
}

}  // namespace orel
