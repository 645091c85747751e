#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Cholesky>

#include "orel/state.hpp"

namespace orel {

/// One detected object pose T_COk as reported by the pose sensor.
struct ObjectPoseMeasurement {
  double t = 0.0;
  std::string object_id;
  Vec3 p_co{Vec3::Zero()};
  Quat q_co{Quat::Identity()};
};

/// All detections extracted from one camera image.
struct FrameMeasurement {
  double t = 0.0;
  std::vector<ObjectPoseMeasurement> detections;
};

enum class RejectReason {
  kNone,
  kChi2,
  kRotationResidualOverflow,  // rotation error near 180 deg
  kSingularInnovation,
};

enum class FrameSkipReason {
  kNone,
  kAnchorNotVisible,
  kAllRejected,
};

struct DetectionReport {
  std::string object_id;
  bool accepted = false;
  bool initialized_this_frame = false;
  double chi2 = 0.0;
  Vec6 residual = Vec6::Zero();
  RejectReason reason = RejectReason::kNone;
};

struct UpdateReport {
  double t = 0.0;
  bool applied = false;
  FrameSkipReason skip_reason = FrameSkipReason::kNone;
  int n_accepted = 0;
  int n_initialized = 0;
  std::vector<DetectionReport> detections;
};

/// Inverts T_COk into T_OkC, the camera pose in the object frame.
inline Pose invert_measurement(const ObjectPoseMeasurement& m) {
  return Pose{m.p_co, m.q_co}.inverse();
}

/// Predicted inverted measurement for object k:
///   z_p = p_OkW + R_OkW (p_WI + R_WI p_IC)
///   z_q = q_OkW (x) q_WI (x) q_IC
inline Pose predict_measurement(const FilterState& s, int k) {
  const ObjectWorldState& obj = s.objects.at(k);
  if (!obj.initialized) {
    throw std::logic_error("predict_measurement: object '" + obj.id + "' not initialized");
  }
  Pose z;
  z.p = obj.p_ow + obj.q_ow * (s.core.p_wi + s.core.q_wi * s.extrinsics.p_ic);
  z.q = quat_multiply(quat_multiply(obj.q_ow, s.core.q_wi), s.extrinsics.q_ic);
  return z;
}

/// Stacked 6-vector residual [position; 2*q_v/q_w rotation] of a detection
/// against the prediction for object k. nullopt when the rotation error is
/// near 180 deg, which marks the measurement unusable.
inline std::optional<Vec6> residual(const ObjectPoseMeasurement& m, const FilterState& s, int k) {
  const Pose z_meas = invert_measurement(m);
  const Pose z_pred = predict_measurement(s, k);
  const Quat q_err = z_pred.q.conjugate() * z_meas.q;
  const std::optional<Vec3> r_rot = quat_residual_to_rotvec(q_err);
  if (!r_rot) {
    return std::nullopt;
  }
  Vec6 r;
  r.head<3>() = z_meas.p - z_pred.p;
  r.tail<3>() = *r_rot;
  return r;
}

/// Measurement Jacobian of the 6-vector residual for object k with respect to
/// the full error state. Rotation errors perturb on the right (body side).
/// The anchor's own object-world columns are zeroed to fix the gauge.
inline MatX measurement_jacobian(const FilterState& s, int k) {
  const ObjectWorldState& obj = s.objects.at(k);
  if (!obj.initialized) {
    throw std::logic_error("measurement_jacobian: object '" + obj.id + "' not initialized");
  }
  const Mat3 r_wi = s.core.q_wi.toRotationMatrix();
  const Mat3 r_ic = s.extrinsics.q_ic.toRotationMatrix();
  const Mat3 r_ow = obj.q_ow.toRotationMatrix();

  MatX h = MatX::Zero(6, s.error_dim());
  h.block<3, 3>(0, idx::kPos) = r_ow;
  h.block<3, 3>(0, idx::kAtt) = -r_ow * r_wi * skew(s.extrinsics.p_ic);
  h.block<3, 3>(0, idx::kExtPos) = r_ow * r_wi;
  h.block<3, 3>(3, idx::kAtt) = r_ic.transpose();
  h.block<3, 3>(3, idx::kExtAtt) = Mat3::Identity();
  if (!obj.is_anchor) {
    const int ok = idx::object(k);
    h.block<3, 3>(0, ok) = Mat3::Identity();
    h.block<3, 3>(0, ok + 3) = -r_ow * skew(s.core.p_wi) - r_ow * skew(r_wi * s.extrinsics.p_ic);
    h.block<3, 3>(3, ok + 3) = r_ic.transpose() * r_wi.transpose();
  }
  return h;
}

struct GateResult {
  bool accept = false;
  double statistic = 0.0;
  bool singular = false;
};

/// chi^2 innovation test: statistic = r^T (H P H^T + R)^-1 r, accepted iff
/// it stays at or below the configured threshold.
inline GateResult chi2_gate(const Vec6& r, const MatX& h, const MatX& cov, const Mat6& r_meas,
                            double threshold) {
  const Mat6 s_inn = h * cov * h.transpose() + r_meas;
  const Eigen::LDLT<Mat6> ldlt(s_inn);
  GateResult out;
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    out.singular = true;
    return out;
  }
  out.statistic = r.dot(ldlt.solve(r));
  out.accept = out.statistic <= threshold;
  return out;
}

/// Places object k's frame relative to the world from the current state and
/// its first (inverted) measurement:
///   R_OkW = R_OkC R_IC^T R_WI^T
///   p_OkW = p_OkC - R_OkW (R_WI p_IC + p_WI)
/// The covariance block is reset to the object prior; the anchor block is
/// zeroed, fixing it as the observability anchor.
inline void init_object_world(FilterState& s, MatX& cov, const ObjectPoseMeasurement& m, int k,
                              const FilterConfig& cfg) {
  ObjectWorldState& obj = s.objects.at(k);
  if (obj.initialized) {
    throw std::logic_error("init_object_world: object '" + obj.id + "' already initialized");
  }
  const int anchor = s.anchor_index();
  if (!obj.is_anchor && (anchor < 0 || !s.objects[anchor].initialized)) {
    throw std::logic_error("init_object_world: anchor must be initialized first");
  }

  const Pose z = invert_measurement(m);
  obj.q_ow = quat_multiply(quat_multiply(z.q, s.extrinsics.q_ic.conjugate()), s.core.q_wi.conjugate());
  obj.p_ow = z.p - obj.q_ow * (s.core.q_wi * s.extrinsics.p_ic + s.core.p_wi);
  obj.initialized = true;

  const int ok = idx::object(k);
  cov.block(ok, 0, 6, cov.cols()).setZero();
  cov.block(0, ok, cov.rows(), 6).setZero();
  if (!obj.is_anchor) {
    cov.block<3, 3>(ok, ok) = (cfg.object_prior_sigma_p * cfg.object_prior_sigma_p) * Mat3::Identity();
    cov.block<3, 3>(ok + 3, ok + 3) =
        (cfg.object_prior_sigma_att * cfg.object_prior_sigma_att) * Mat3::Identity();
  }
}

/// Full frame update: anchor visibility check, first-sight initialization,
/// per-object chi^2 gating, residual/Jacobian stacking and a Joseph-form EKF
/// correction. All failure modes land in the report instead of throwing.
inline UpdateReport apply_frame(FilterState& s, MatX& cov, const FrameMeasurement& frame,
                                const FilterConfig& cfg) {
  if (frame.t < s.t - 1e-9) {
    throw std::invalid_argument("apply_frame: frame predates filter state");
  }

  UpdateReport report;
  report.t = frame.t;

  // Normalize detection order by object id for deterministic stacking.
  std::vector<ObjectPoseMeasurement> dets = frame.detections;
  std::sort(dets.begin(), dets.end(),
            [](const auto& a, const auto& b) { return a.object_id < b.object_id; });
  std::set<std::string> seen;
  for (const auto& d : dets) {
    if (!seen.insert(d.object_id).second) {
      throw std::invalid_argument("apply_frame: duplicate detection for object '" + d.object_id + "'");
    }
    if (s.object_index(d.object_id) < 0) {
      throw std::invalid_argument("apply_frame: unknown object id '" + d.object_id + "'");
    }
    report.detections.push_back(DetectionReport{d.object_id});
  }

  const int anchor = s.anchor_index();
  const bool anchor_visible =
      anchor >= 0 && std::any_of(dets.begin(), dets.end(), [&](const auto& d) {
        return d.object_id == s.objects[anchor].id;
      });
  if (!anchor_visible) {
    report.skip_reason = FrameSkipReason::kAnchorNotVisible;
    return report;
  }

  // First-sight initialization, anchor first.
  for (int pass = 0; pass < 2; ++pass) {
    for (size_t i = 0; i < dets.size(); ++i) {
      const int k = s.object_index(dets[i].object_id);
      const bool is_anchor = s.objects[k].is_anchor;
      if ((pass == 0) != is_anchor) continue;
      if (!s.objects[k].initialized) {
        init_object_world(s, cov, dets[i], k, cfg);
        report.detections[i].initialized_this_frame = true;
        ++report.n_initialized;
      }
    }
  }

  // Per-object residuals and gating against the pre-update covariance.
  Mat6 r_meas = Mat6::Zero();
  r_meas.topLeftCorner<3, 3>() = (cfg.meas_noise.sigma_p * cfg.meas_noise.sigma_p) * Mat3::Identity();
  r_meas.bottomRightCorner<3, 3>() =
      (cfg.meas_noise.sigma_theta * cfg.meas_noise.sigma_theta) * Mat3::Identity();

  std::vector<int> accepted;
  std::vector<Vec6> residuals(dets.size());
  std::vector<MatX> jacobians(dets.size());
  for (size_t i = 0; i < dets.size(); ++i) {
    const int k = s.object_index(dets[i].object_id);
    const std::optional<Vec6> r = residual(dets[i], s, k);
    if (!r) {
      report.detections[i].reason = RejectReason::kRotationResidualOverflow;
      continue;
    }
    report.detections[i].residual = *r;
    jacobians[i] = measurement_jacobian(s, k);
    const GateResult gate = chi2_gate(*r, jacobians[i], cov, r_meas, cfg.chi2_gate_threshold);
    report.detections[i].chi2 = gate.statistic;
    if (gate.singular) {
      report.detections[i].reason = RejectReason::kSingularInnovation;
      continue;
    }
    if (!gate.accept) {
      report.detections[i].reason = RejectReason::kChi2;
      continue;
    }
    report.detections[i].accepted = true;
    residuals[i] = *r;
    accepted.push_back(static_cast<int>(i));
  }
  report.n_accepted = static_cast<int>(accepted.size());
  if (accepted.empty()) {
    report.skip_reason = FrameSkipReason::kAllRejected;
    s.t = frame.t;
    return report;
  }

  // Stack survivors and apply the EKF correction.
  const int dim = s.error_dim();
  const int m = 6 * static_cast<int>(accepted.size());
  MatX h(m, dim);
  VecX r_stack(m);
  MatX r_big = MatX::Zero(m, m);
  for (size_t j = 0; j < accepted.size(); ++j) {
    h.middleRows(6 * j, 6) = jacobians[accepted[j]];
    r_stack.segment(6 * j, 6) = residuals[accepted[j]];
    r_big.block(6 * j, 6 * j, 6, 6) = r_meas;
  }

  const MatX s_inn = h * cov * h.transpose() + r_big;
  const Eigen::LDLT<MatX> ldlt(s_inn);
  if (ldlt.info() != Eigen::Success) {
    for (int i : accepted) {
      report.detections[i].accepted = false;
      report.detections[i].reason = RejectReason::kSingularInnovation;
    }
    report.n_accepted = 0;
    report.skip_reason = FrameSkipReason::kAllRejected;
    s.t = frame.t;
    return report;
  }
  const MatX gain = ldlt.solve(h * cov).transpose();  // K = P H^T S^-1

  inject_error(s, gain * r_stack);
  const MatX ikh = MatX::Identity(dim, dim) - gain * h;
  cov = ikh * cov * ikh.transpose() + gain * r_big * gain.transpose();
  symmetrize(cov);

  report.applied = true;
  s.t = frame.t;
  return report;
}

inline const char* to_string(RejectReason r) {
  switch (r) {
    case RejectReason::kNone: return "-";
    case RejectReason::kChi2: return "chi2";
    case RejectReason::kRotationResidualOverflow: return "rot-residual-180";
    case RejectReason::kSingularInnovation: return "singular-innovation";
  }
  return "?";
}

inline const char* to_string(FrameSkipReason r) {
  switch (r) {
    case FrameSkipReason::kNone: return "-";
    case FrameSkipReason::kAnchorNotVisible: return "anchor-not-visible";
    case FrameSkipReason::kAllRejected: return "all-rejected";
  }
  return "?";
}

}  // namespace orel
