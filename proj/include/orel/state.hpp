#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "orel/so3.hpp"

namespace orel {

/// chi^2 95th percentile with 6 degrees of freedom, the default per-object
/// innovation gate.
inline constexpr double kChi2Gate6Dof95 = 12.591587243743977;

/// IMU pose, velocity and bias states.
struct CoreState {
  Vec3 p_wi{Vec3::Zero()};
  Vec3 v_wi{Vec3::Zero()};
  Quat q_wi{Quat::Identity()};
  Vec3 b_w{Vec3::Zero()};
  Vec3 b_a{Vec3::Zero()};
};

/// IMU-camera extrinsic calibration T_IC.
struct ExtrinsicsState {
  Vec3 p_ic{Vec3::Zero()};
  Quat q_ic{Quat::Identity()};
};

/// Per-object transform T_OkW placing the navigation world in the object
/// frame. Starts uninitialized; the anchor object stays fixed once set.
struct ObjectWorldState {
  std::string id;
  Vec3 p_ow{Vec3::Zero()};
  Quat q_ow{Quat::Identity()};
  bool initialized = false;
  bool is_anchor = false;
};

/// Error-state segment offsets. Layout:
/// [dp_wi dv_wi dth_wi db_w db_a | dp_ic dth_ic | dp_o0 dth_o0 | ...]
namespace idx {
inline constexpr int kPos = 0;
inline constexpr int kVel = 3;
inline constexpr int kAtt = 6;
inline constexpr int kBw = 9;
inline constexpr int kBa = 12;
inline constexpr int kCoreDim = 15;
inline constexpr int kExtPos = 15;
inline constexpr int kExtAtt = 18;
inline constexpr int kObjBase = 21;
inline constexpr int object(int k) { return kObjBase + 6 * k; }
}  // namespace idx

/// Continuous-time IMU noise densities plus the world gravity vector.
/// Zero densities are allowed (noiseless propagation); negative ones are not.
struct ImuNoiseModel {
  double sigma_na = 3.0e-3;  // accel white noise [m/s^2/sqrt(Hz)]
  double sigma_nw = 2.0e-4;  // gyro white noise [rad/s/sqrt(Hz)]
  double sigma_ba = 1.0e-4;  // accel bias random walk [m/s^3*sqrt(s)]
  double sigma_bw = 1.0e-5;  // gyro bias random walk [rad/s^2*sqrt(s)]
  Vec3 gravity{0.0, 0.0, -9.81};
};

/// Fixed per-axis measurement uncertainty of the object pose sensor.
struct MeasurementNoise {
  double sigma_p = 0.10;                       // [m]
  double sigma_theta = 20.0 * M_PI / 180.0;    // [rad]
};

struct FilterConfig {
  std::vector<std::string> object_ids;
  std::string anchor_id;

  Vec3 extrinsics_p_prior{Vec3::Zero()};
  Quat extrinsics_q_prior{Quat::Identity()};

  // Initial standard deviations of the error state.
  double sigma0_p = 1.0e-3;
  double sigma0_v = 1.0e-3;
  double sigma0_att = 1.0e-3;
  double sigma0_bw = 1.0e-4;
  double sigma0_ba = 1.0e-3;
  double sigma0_ext_p = 0.05;
  double sigma0_ext_att = 0.05;

  // Prior for object-world blocks; objects are unknown until first sight.
  double object_prior_sigma_p = 10.0;
  double object_prior_sigma_att = 1.0;

  ImuNoiseModel imu_noise;
  MeasurementNoise meas_noise;
  double chi2_gate_threshold = kChi2Gate6Dof95;

  int anchor_index() const {
    const auto it = std::find(object_ids.begin(), object_ids.end(), anchor_id);
    return it == object_ids.end() ? -1 : static_cast<int>(it - object_ids.begin());
  }

  void validate() const {
    if (object_ids.empty()) {
      throw std::invalid_argument("filter config: object list is empty");
    }
    for (size_t i = 0; i < object_ids.size(); ++i) {
      for (size_t j = i + 1; j < object_ids.size(); ++j) {
        if (object_ids[i] == object_ids[j]) {
          throw std::invalid_argument("filter config: duplicate object id '" + object_ids[i] + "'");
        }
      }
    }
    if (std::find(object_ids.begin(), object_ids.end(), anchor_id) == object_ids.end()) {
      throw std::invalid_argument("filter config: anchor id '" + anchor_id + "' not among object ids");
    }
    const double sigmas[] = {sigma0_p, sigma0_v, sigma0_att, sigma0_bw, sigma0_ba,
                             sigma0_ext_p, sigma0_ext_att,
                             object_prior_sigma_p, object_prior_sigma_att};
    for (double s : sigmas) {
      if (!(s > 0.0)) {
        throw std::invalid_argument("filter config: initial covariance entries must be positive");
      }
    }
    if (imu_noise.sigma_na < 0.0 || imu_noise.sigma_nw < 0.0 ||
        imu_noise.sigma_ba < 0.0 || imu_noise.sigma_bw < 0.0) {
      throw std::invalid_argument("filter config: negative IMU noise density");
    }
    if (!(meas_noise.sigma_p > 0.0) || !(meas_noise.sigma_theta > 0.0)) {
      throw std::invalid_argument("filter config: measurement noise must be positive");
    }
    if (!(chi2_gate_threshold > 0.0)) {
      throw std::invalid_argument("filter config: chi2 gate threshold must be positive");
    }
  }
};

struct FilterState {
  CoreState core;
  ExtrinsicsState extrinsics;
  std::vector<ObjectWorldState> objects;
  double t = 0.0;

  int error_dim() const { return idx::kObjBase + 6 * static_cast<int>(objects.size()); }

  int object_index(const std::string& id) const {
    for (size_t k = 0; k < objects.size(); ++k) {
      if (objects[k].id == id) return static_cast<int>(k);
    }
    return -1;
  }

  int anchor_index() const {
    for (size_t k = 0; k < objects.size(); ++k) {
      if (objects[k].is_anchor) return static_cast<int>(k);
    }
    return -1;
  }
};

/// A filter instance: nominal state plus error covariance.
struct Filter {
  FilterState state;
  MatX cov;
};

inline void symmetrize(MatX& m) { m = ((m + m.transpose()) * 0.5).eval(); }

/// Builds the initial state and covariance. The IMU starts at the world
/// origin with identity attitude and zero velocity/biases; extrinsics come
/// from the config prior; objects are uninitialized with a large prior.
inline Filter new_filter(const FilterConfig& cfg) {
  cfg.validate();
  Filter f;
  f.state.extrinsics.p_ic = cfg.extrinsics_p_prior;
  f.state.extrinsics.q_ic = cfg.extrinsics_q_prior.normalized();
  f.state.objects.reserve(cfg.object_ids.size());
  for (const auto& id : cfg.object_ids) {
    ObjectWorldState obj;
    obj.id = id;
    obj.is_anchor = (id == cfg.anchor_id);
    f.state.objects.push_back(obj);
  }

  const int dim = f.state.error_dim();
  VecX diag(dim);
  diag.segment<3>(idx::kPos).setConstant(cfg.sigma0_p * cfg.sigma0_p);
  diag.segment<3>(idx::kVel).setConstant(cfg.sigma0_v * cfg.sigma0_v);
  diag.segment<3>(idx::kAtt).setConstant(cfg.sigma0_att * cfg.sigma0_att);
  diag.segment<3>(idx::kBw).setConstant(cfg.sigma0_bw * cfg.sigma0_bw);
  diag.segment<3>(idx::kBa).setConstant(cfg.sigma0_ba * cfg.sigma0_ba);
  diag.segment<3>(idx::kExtPos).setConstant(cfg.sigma0_ext_p * cfg.sigma0_ext_p);
  diag.segment<3>(idx::kExtAtt).setConstant(cfg.sigma0_ext_att * cfg.sigma0_ext_att);
  for (size_t k = 0; k < f.state.objects.size(); ++k) {
    diag.segment<3>(idx::object(static_cast<int>(k))).setConstant(cfg.object_prior_sigma_p * cfg.object_prior_sigma_p);
    diag.segment<3>(idx::object(static_cast<int>(k)) + 3).setConstant(cfg.object_prior_sigma_att * cfg.object_prior_sigma_att);
  }
  f.cov = diag.asDiagonal();
  return f;
}

/// Applies an error-state correction. Translational segments add; rotation
/// segments compose on the right: q <- q (x) exp(dth). Exactly-zero segments
/// leave their states untouched so fixed sub-states stay bit-identical.
inline void inject_error(FilterState& s, const Eigen::Ref<const VecX>& delta) {
  if (delta.size() != s.error_dim()) {
    throw std::invalid_argument("inject_error: delta dimension " + std::to_string(delta.size()) +
                                " does not match error-state dimension " + std::to_string(s.error_dim()));
  }
  const auto add = [](Vec3& target, const Eigen::Ref<const Vec3>& d) {
    if (!d.isZero(0.0)) target += d;
  };
  const auto rotate = [](Quat& q, const Eigen::Ref<const Vec3>& dth) {
    if (dth.isZero(0.0)) return;
    q = q * small_angle_quat(dth);
    q.normalize();
  };
  add(s.core.p_wi, delta.segment<3>(idx::kPos));
  add(s.core.v_wi, delta.segment<3>(idx::kVel));
  rotate(s.core.q_wi, delta.segment<3>(idx::kAtt));
  add(s.core.b_w, delta.segment<3>(idx::kBw));
  add(s.core.b_a, delta.segment<3>(idx::kBa));
  add(s.extrinsics.p_ic, delta.segment<3>(idx::kExtPos));
  rotate(s.extrinsics.q_ic, delta.segment<3>(idx::kExtAtt));
  for (size_t k = 0; k < s.objects.size(); ++k) {
    add(s.objects[k].p_ow, delta.segment<3>(idx::object(static_cast<int>(k))));
    rotate(s.objects[k].q_ow, delta.segment<3>(idx::object(static_cast<int>(k)) + 3));
  }
}

}  // namespace orel
