#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <yaml-cpp/yaml.h>

#include "orel/sim.hpp"
#include "orel/state.hpp"

namespace orel {

class ConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Everything one reproducible experiment needs: scene, trajectory, filter
/// parameters and the seed.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  TrajectorySpec trajectory;
  ScenarioSpec scenario;
  FilterConfig filter;
};

namespace detail {

[[noreturn]] inline void config_fail(const YAML::Node& node, const std::string& msg) {
  std::string where;
  if (node.Mark().line >= 0) {
    where = " (line " + std::to_string(node.Mark().line + 1) + ")";
  }
  throw ConfigError(msg + where);
}

inline Vec3 parse_vec3(const YAML::Node& node, const char* name) {
  if (!node || !node.IsSequence() || node.size() != 3) {
    config_fail(node, std::string("expected a 3-element sequence for '") + name + "'");
  }
  return Vec3(node[0].as<double>(), node[1].as<double>(), node[2].as<double>());
}

inline Quat parse_quat(const YAML::Node& node, const char* name) {
  if (!node || !node.IsSequence() || node.size() != 4) {
    config_fail(node, std::string("expected [qx, qy, qz, qw] for '") + name + "'");
  }
  Quat q(node[3].as<double>(), node[0].as<double>(), node[1].as<double>(), node[2].as<double>());
  if (q.norm() < 1e-9) config_fail(node, std::string("zero-norm quaternion for '") + name + "'");
  q.normalize();
  return q;
}

inline double get_or(const YAML::Node& node, const char* key, double fallback) {
  return node[key] ? node[key].as<double>() : fallback;
}

inline ImuNoiseModel parse_imu_noise(const YAML::Node& node, const ImuNoiseModel& base) {
  ImuNoiseModel m = base;
  if (!node) return m;
  m.sigma_na = get_or(node, "accel_density", m.sigma_na);
  m.sigma_nw = get_or(node, "gyro_density", m.sigma_nw);
  m.sigma_ba = get_or(node, "accel_walk", m.sigma_ba);
  m.sigma_bw = get_or(node, "gyro_walk", m.sigma_bw);
  return m;
}

inline MeasurementNoise parse_meas_noise(const YAML::Node& node, const MeasurementNoise& base) {
  MeasurementNoise m = base;
  if (!node) return m;
  m.sigma_p = get_or(node, "sigma_p", m.sigma_p);
  if (node["sigma_theta_deg"]) {
    m.sigma_theta = node["sigma_theta_deg"].as<double>() * M_PI / 180.0;
  } else if (node["sigma_theta"]) {
    m.sigma_theta = node["sigma_theta"].as<double>();
  }
  return m;
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const YAML::Node& root) {
  ExperimentConfig cfg;
  if (root["seed"]) cfg.seed = root["seed"].as<std::uint64_t>();

  // --- trajectory ---
  const YAML::Node traj = root["trajectory"];
  if (!traj) throw ConfigError("missing 'trajectory' section");
  if (traj["kind"]) {
    const std::string kind = traj["kind"].as<std::string>();
    if (kind == "circle") {
      cfg.trajectory.kind = TrajectoryKind::kCircle;
    } else if (kind == "lemniscate") {
      cfg.trajectory.kind = TrajectoryKind::kLemniscate;
    } else if (kind == "waypoint-spline") {
      cfg.trajectory.kind = TrajectoryKind::kWaypointSpline;
    } else {
      detail::config_fail(traj["kind"], "unknown trajectory kind '" + kind + "'");
    }
  }
  if (traj["center"]) cfg.trajectory.center = detail::parse_vec3(traj["center"], "center");
  cfg.trajectory.radius = detail::get_or(traj, "radius", cfg.trajectory.radius);
  cfg.trajectory.angular_rate = detail::get_or(traj, "angular_rate", cfg.trajectory.angular_rate);
  if (traj["yaw_mode"]) {
    const std::string mode = traj["yaw_mode"].as<std::string>();
    if (mode == "face-center") {
      cfg.trajectory.yaw_mode = YawMode::kFaceCenter;
    } else if (mode == "fixed") {
      cfg.trajectory.yaw_mode = YawMode::kFixed;
    } else {
      detail::config_fail(traj["yaw_mode"], "unknown yaw mode '" + mode + "'");
    }
  }
  cfg.trajectory.duration = detail::get_or(traj, "duration", cfg.trajectory.duration);
  cfg.trajectory.ramp_time = detail::get_or(traj, "ramp_time", cfg.trajectory.ramp_time);
  if (traj["waypoints"]) {
    for (const auto& wp : traj["waypoints"]) {
      cfg.trajectory.waypoints.push_back(detail::parse_vec3(wp, "waypoints"));
    }
  }

  // --- scenario ---
  const YAML::Node scen = root["scenario"];
  if (!scen) throw ConfigError("missing 'scenario' section");
  cfg.scenario.imu_rate = detail::get_or(scen, "imu_rate", cfg.scenario.imu_rate);
  cfg.scenario.cam_rate = detail::get_or(scen, "cam_rate", cfg.scenario.cam_rate);
  if (!scen["anchor"]) detail::config_fail(scen, "scenario is missing 'anchor'");
  cfg.scenario.anchor_id = scen["anchor"].as<std::string>();
  if (!scen["objects"] || !scen["objects"].IsSequence() || scen["objects"].size() == 0) {
    detail::config_fail(scen, "scenario needs a non-empty 'objects' list");
  }
  for (const auto& obj : scen["objects"]) {
    if (!obj["id"]) detail::config_fail(obj, "object entry is missing 'id'");
    ObjectTruth truth;
    truth.id = obj["id"].as<std::string>();
    truth.pose.p = detail::parse_vec3(obj["position"], "position");
    if (obj["orientation"]) truth.pose.q = detail::parse_quat(obj["orientation"], "orientation");
    cfg.scenario.objects.push_back(truth);
  }
  if (scen["extrinsics"]) {
    cfg.scenario.extrinsics.p_ic = detail::parse_vec3(scen["extrinsics"]["position"], "extrinsics.position");
    cfg.scenario.extrinsics.q_ic = detail::parse_quat(scen["extrinsics"]["orientation"], "extrinsics.orientation");
  }
  if (scen["gravity"]) cfg.scenario.imu_noise.gravity = detail::parse_vec3(scen["gravity"], "gravity");
  cfg.scenario.imu_noise = detail::parse_imu_noise(scen["imu_noise"], cfg.scenario.imu_noise);
  cfg.scenario.meas_noise = detail::parse_meas_noise(scen["measurement_noise"], cfg.scenario.meas_noise);
  if (scen["outliers"]) {
    const YAML::Node o = scen["outliers"];
    cfg.scenario.outlier_rate = detail::get_or(o, "rate", cfg.scenario.outlier_rate);
    cfg.scenario.outlier_pos = detail::get_or(o, "position", cfg.scenario.outlier_pos);
    if (o["rotation_deg"]) cfg.scenario.outlier_rot = o["rotation_deg"].as<double>() * M_PI / 180.0;
  }
  if (scen["visibility"]) {
    const YAML::Node v = scen["visibility"];
    if (v["fov_half_angle_deg"]) {
      cfg.scenario.fov_half_angle = v["fov_half_angle_deg"].as<double>() * M_PI / 180.0;
    }
    cfg.scenario.max_range = detail::get_or(v, "max_range", cfg.scenario.max_range);
  }
  for (const auto& b : scen["blackouts"]) {
    Blackout bo;
    if (!b["object"]) detail::config_fail(b, "blackout entry is missing 'object'");
    bo.object_id = b["object"].as<std::string>();
    bo.t_start = detail::get_or(b, "start", 0.0);
    bo.t_end = detail::get_or(b, "end", 0.0);
    cfg.scenario.blackouts.push_back(bo);
  }
  cfg.scenario.seed = cfg.seed;

  // --- filter ---
  const YAML::Node filt = root["filter"];
  for (const auto& obj : cfg.scenario.objects) cfg.filter.object_ids.push_back(obj.id);
  cfg.filter.anchor_id = cfg.scenario.anchor_id;
  cfg.filter.extrinsics_p_prior = cfg.scenario.extrinsics.p_ic;
  cfg.filter.extrinsics_q_prior = cfg.scenario.extrinsics.q_ic;
  cfg.filter.imu_noise = cfg.scenario.imu_noise;
  cfg.filter.meas_noise = cfg.scenario.meas_noise;
  if (filt) {
    if (filt["extrinsics_prior"]) {
      const YAML::Node e = filt["extrinsics_prior"];
      if (e["position"]) cfg.filter.extrinsics_p_prior = detail::parse_vec3(e["position"], "position");
      if (e["orientation"]) cfg.filter.extrinsics_q_prior = detail::parse_quat(e["orientation"], "orientation");
    }
    if (filt["extrinsics_sigmas"]) {
      cfg.filter.sigma0_ext_p = detail::get_or(filt["extrinsics_sigmas"], "position", cfg.filter.sigma0_ext_p);
      cfg.filter.sigma0_ext_att = detail::get_or(filt["extrinsics_sigmas"], "attitude", cfg.filter.sigma0_ext_att);
    }
    if (filt["initial_sigmas"]) {
      const YAML::Node s = filt["initial_sigmas"];
      cfg.filter.sigma0_p = detail::get_or(s, "position", cfg.filter.sigma0_p);
      cfg.filter.sigma0_v = detail::get_or(s, "velocity", cfg.filter.sigma0_v);
      cfg.filter.sigma0_att = detail::get_or(s, "attitude", cfg.filter.sigma0_att);
      cfg.filter.sigma0_bw = detail::get_or(s, "gyro_bias", cfg.filter.sigma0_bw);
      cfg.filter.sigma0_ba = detail::get_or(s, "accel_bias", cfg.filter.sigma0_ba);
    }
    if (filt["object_prior"]) {
      cfg.filter.object_prior_sigma_p = detail::get_or(filt["object_prior"], "position", cfg.filter.object_prior_sigma_p);
      cfg.filter.object_prior_sigma_att = detail::get_or(filt["object_prior"], "attitude", cfg.filter.object_prior_sigma_att);
    }
    cfg.filter.imu_noise = detail::parse_imu_noise(filt["imu_noise"], cfg.filter.imu_noise);
    cfg.filter.meas_noise = detail::parse_meas_noise(filt["measurement_noise"], cfg.filter.meas_noise);
    cfg.filter.chi2_gate_threshold = detail::get_or(filt, "chi2_gate", cfg.filter.chi2_gate_threshold);
  }

  try {
    cfg.filter.validate();
    detail::validate_scenario(cfg.scenario);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path);
  } catch (const YAML::BadFile&) {
    throw ConfigError("cannot open config file '" + path + "'");
  } catch (const YAML::Exception& e) {
    throw ConfigError("config parse error in '" + path + "': " + e.what());
  }
  try {
    return parse_experiment_config(root);
  } catch (const YAML::Exception& e) {
    throw ConfigError("config error in '" + path + "': " + e.what());
  }
}

}  // namespace orel
