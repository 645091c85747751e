#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "orel/propagation.hpp"
#include "orel/rng.hpp"
#include "orel/trajectory.hpp"
#include "orel/update.hpp"

namespace orel {

enum class TrajectoryKind { kCircle, kLemniscate, kWaypointSpline };
enum class YawMode { kFaceCenter, kFixed };

/// Analytic ground-truth path of the IMU. All kinds are horizontal-plane
/// curves traversed with an eased-in parameter (the body starts at rest) and
/// a yaw-only attitude profile, so the initial IMU frame stays
/// gravity-aligned.
struct TrajectorySpec {
  TrajectoryKind kind = TrajectoryKind::kCircle;
  Vec3 center{0.0, 0.0, 1.0};
  double radius = 2.0;       // circle radius / lemniscate & spline scale
  double angular_rate = 0.5; // path parameter rate [rad/s]
  YawMode yaw_mode = YawMode::kFaceCenter;
  double duration = 60.0;
  double ramp_time = 2.0;    // ease-in window keeping v(0) = 0
  std::vector<Vec3> waypoints;  // kWaypointSpline only, traversed as a loop
};

struct ObjectTruth {
  std::string id;
  Pose pose;  // T_WO
};

struct Blackout {
  std::string object_id;
  double t_start = 0.0;
  double t_end = 0.0;
};

/// Everything the synthetic scene needs: object constellation, sensor rates,
/// true extrinsics, noise, outlier and visibility models.
struct ScenarioSpec {
  std::vector<ObjectTruth> objects;
  std::string anchor_id;
  double imu_rate = 200.0;
  double cam_rate = 30.0;
  ExtrinsicsState extrinsics;  // true T_IC
  ImuNoiseModel imu_noise;     // sigmas may be zero for a noiseless run
  MeasurementNoise meas_noise; // may be zero as well
  double outlier_rate = 0.0;
  double outlier_pos = 1.0;            // [m]
  double outlier_rot = 0.5 * M_PI;     // [rad]
  double fov_half_angle = 60.0 * M_PI / 180.0;
  double max_range = 10.0;
  std::vector<Blackout> blackouts;
  std::uint64_t seed = 0;
};

struct SimulationOutput {
  Trajectory ground_truth;            // T_WI at every IMU and camera tick
  std::vector<ImuSample> imu_stream;
  std::vector<FrameMeasurement> frames;
  std::vector<ObjectTruth> truth_objects;  // re-expressed in W
  ExtrinsicsState truth_extrinsics;
  // Truth-side metadata, parallel to frames: ids whose detection was
  // replaced by a gross outlier. Not part of the serialized log.
  std::vector<std::vector<std::string>> outlier_ids;
};

namespace detail {

struct ParamSample {
  double s = 0.0;   // eased path parameter
  double ds = 0.0;  // first derivative
  double dds = 0.0; // second derivative
};

inline ParamSample eased_parameter(double t, double ramp_time) {
  ParamSample out;
  if (ramp_time <= 0.0 || t >= ramp_time) {
    out.s = (ramp_time <= 0.0) ? t : 0.5 * ramp_time + (t - ramp_time);
    out.ds = 1.0;
    out.dds = 0.0;
    return out;
  }
  const double u = t / ramp_time;
  out.s = ramp_time * (u * u * u - 0.5 * u * u * u * u);
  out.ds = 3.0 * u * u - 2.0 * u * u * u;
  out.dds = (6.0 * u - 6.0 * u * u) / ramp_time;
  return out;
}

/// Periodic natural cubic spline through points y_0..y_{n-1} with unit knot
/// spacing; evaluates value and two derivatives at wrapped parameter tau.
class PeriodicSpline {
 public:
  explicit PeriodicSpline(const std::vector<Vec3>& points) : y_(points) {
    const int n = static_cast<int>(points.size());
    MatX a = MatX::Zero(n, n);
    MatX rhs = MatX::Zero(n, 3);
    for (int i = 0; i < n; ++i) {
      const int prev = (i + n - 1) % n;
      const int next = (i + 1) % n;
      a(i, prev) += 1.0;
      a(i, i) += 4.0;
      a(i, next) += 1.0;
      rhs.row(i) = 6.0 * (points[next] + points[prev] - 2.0 * points[i]).transpose();
    }
    m_ = a.partialPivLu().solve(rhs);
  }

  void eval(double tau, Vec3* p, Vec3* dp, Vec3* ddp) const {
    const int n = static_cast<int>(y_.size());
    double wrapped = std::fmod(tau, static_cast<double>(n));
    if (wrapped < 0.0) wrapped += n;
    int i = static_cast<int>(wrapped);
    if (i >= n) i = n - 1;
    const double u = wrapped - i;
    const int next = (i + 1) % n;
    const Vec3 mi = m_.row(i).transpose();
    const Vec3 mn = m_.row(next).transpose();
    const double v = 1.0 - u;
    *p = mi * (v * v * v / 6.0) + mn * (u * u * u / 6.0) +
         (y_[i] - mi / 6.0) * v + (y_[next] - mn / 6.0) * u;
    *dp = -mi * (v * v / 2.0) + mn * (u * u / 2.0) + (y_[next] - y_[i]) + (mi - mn) / 6.0;
    *ddp = mi * v + mn * u;
  }

 private:
  std::vector<Vec3> y_;
  MatX m_;
};

struct TrajSample {
  Vec3 p{Vec3::Zero()};
  Vec3 v{Vec3::Zero()};
  Vec3 a{Vec3::Zero()};
  double yaw = 0.0;
  double yaw_rate = 0.0;
};

/// Evaluates position/velocity/acceleration and the yaw profile at time t,
/// in simulator-world coordinates.
class TrajectoryEvaluator {
 public:
  explicit TrajectoryEvaluator(const TrajectorySpec& spec) : spec_(spec) {
    if (spec.kind == TrajectoryKind::kWaypointSpline) {
      if (spec.waypoints.size() < 3) {
        throw std::invalid_argument("trajectory: waypoint spline needs at least 3 waypoints");
      }
      spline_.emplace(spec.waypoints);
    }
    if (spec.kind == TrajectoryKind::kLemniscate && spec.yaw_mode == YawMode::kFaceCenter) {
      throw std::invalid_argument(
          "trajectory: lemniscate passes through its center; face-center yaw is undefined "
          "(use yaw_mode: fixed)");
    }
    if (!(spec.duration > 0.0) || !(spec.radius > 0.0) || spec.angular_rate < 0.0 ||
        spec.ramp_time < 0.0) {
      throw std::invalid_argument("trajectory: duration/radius must be positive, rates nonnegative");
    }
    fixed_yaw_ = initial_bearing();
  }

  TrajSample at(double t) const {
    const ParamSample ps = eased_parameter(t, spec_.ramp_time);
    const double xi = spec_.angular_rate * ps.s;
    const double dxi = spec_.angular_rate * ps.ds;
    const double ddxi = spec_.angular_rate * ps.dds;

    TrajSample out;
    switch (spec_.kind) {
      case TrajectoryKind::kCircle: {
        const double c = std::cos(xi), s = std::sin(xi);
        out.p = spec_.center + spec_.radius * Vec3(c, s, 0.0);
        out.v = spec_.radius * dxi * Vec3(-s, c, 0.0);
        out.a = spec_.radius * (ddxi * Vec3(-s, c, 0.0) - dxi * dxi * Vec3(c, s, 0.0));
        break;
      }
      case TrajectoryKind::kLemniscate: {
        const double s1 = std::sin(xi), c1 = std::cos(xi);
        const double s2 = std::sin(2.0 * xi), c2 = std::cos(2.0 * xi);
        out.p = spec_.center + spec_.radius * Vec3(s1, 0.5 * s2, 0.0);
        out.v = spec_.radius * dxi * Vec3(c1, c2, 0.0);
        out.a = spec_.radius * (ddxi * Vec3(c1, c2, 0.0) - dxi * dxi * Vec3(s1, 2.0 * s2, 0.0));
        break;
      }
      case TrajectoryKind::kWaypointSpline: {
        const double n = static_cast<double>(spec_.waypoints.size());
        const double scale = n / (2.0 * M_PI);  // one loop per 2*pi/angular_rate seconds
        Vec3 p, dp, ddp;
        spline_->eval(scale * xi, &p, &dp, &ddp);
        out.p = spec_.center + spec_.radius * p;
        out.v = spec_.radius * dp * (scale * dxi);
        out.a = spec_.radius * (ddp * (scale * dxi) * (scale * dxi) + dp * (scale * ddxi));
        break;
      }
    }

    if (spec_.yaw_mode == YawMode::kFixed) {
      out.yaw = fixed_yaw_;
      out.yaw_rate = 0.0;
    } else {
      const double uy = spec_.center.y() - out.p.y();
      const double ux = spec_.center.x() - out.p.x();
      const double d2 = ux * ux + uy * uy;
      if (d2 < 1e-12) {
        throw std::invalid_argument("trajectory: path crosses the yaw target; face-center undefined");
      }
      out.yaw = std::atan2(uy, ux);
      out.yaw_rate = (-out.v.y() * ux + uy * out.v.x()) / d2;
    }
    return out;
  }

  Pose pose_at(double t) const {
    const TrajSample ts = at(t);
    return Pose{ts.p, yaw_quat(ts.yaw)};
  }

  static Quat yaw_quat(double yaw) {
    return Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ()));
  }

 private:
  double initial_bearing() const {
    const ParamSample ps = eased_parameter(0.0, spec_.ramp_time);
    const double xi = spec_.angular_rate * ps.s;
    Vec3 p0;
    switch (spec_.kind) {
      case TrajectoryKind::kCircle:
        p0 = spec_.center + spec_.radius * Vec3(std::cos(xi), std::sin(xi), 0.0);
        break;
      case TrajectoryKind::kLemniscate:
        p0 = spec_.center + spec_.radius * Vec3(std::sin(xi), 0.5 * std::sin(2.0 * xi), 0.0);
        break;
      case TrajectoryKind::kWaypointSpline: {
        Vec3 p, dp, ddp;
        spline_->eval(0.0, &p, &dp, &ddp);
        p0 = spec_.center + spec_.radius * p;
        break;
      }
    }
    const double uy = spec_.center.y() - p0.y();
    const double ux = spec_.center.x() - p0.x();
    if (ux * ux + uy * uy < 1e-12) return 0.0;
    return std::atan2(uy, ux);
  }

  TrajectorySpec spec_;
  std::optional<PeriodicSpline> spline_;
  double fixed_yaw_ = 0.0;
};

inline void validate_scenario(const ScenarioSpec& s) {
  if (s.objects.empty()) throw std::invalid_argument("scenario: no objects");
  std::set<std::string> ids;
  for (const auto& o : s.objects) {
    if (!ids.insert(o.id).second) {
      throw std::invalid_argument("scenario: duplicate object id '" + o.id + "'");
    }
  }
  if (!ids.count(s.anchor_id)) {
    throw std::invalid_argument("scenario: anchor id '" + s.anchor_id + "' not among objects");
  }
  if (!(s.imu_rate > 0.0) || !(s.cam_rate > 0.0)) {
    throw std::invalid_argument("scenario: sensor rates must be positive");
  }
  if (s.outlier_rate < 0.0 || s.outlier_rate >= 1.0) {
    throw std::invalid_argument("scenario: outlier rate must be in [0, 1)");
  }
  if (!(s.fov_half_angle > 0.0) || s.fov_half_angle >= M_PI) {
    throw std::invalid_argument("scenario: fov half angle must be in (0, pi)");
  }
  if (!(s.max_range > 0.0)) throw std::invalid_argument("scenario: max range must be positive");
  if (s.meas_noise.sigma_p < 0.0 || s.meas_noise.sigma_theta < 0.0) {
    throw std::invalid_argument("scenario: negative measurement noise");
  }
  if (s.imu_noise.sigma_na < 0.0 || s.imu_noise.sigma_nw < 0.0 || s.imu_noise.sigma_ba < 0.0 ||
      s.imu_noise.sigma_bw < 0.0) {
    throw std::invalid_argument("scenario: negative IMU noise density");
  }
  for (const auto& b : s.blackouts) {
    if (!ids.count(b.object_id)) {
      throw std::invalid_argument("scenario: blackout references unknown object '" + b.object_id + "'");
    }
    if (!(b.t_start < b.t_end)) {
      throw std::invalid_argument("scenario: blackout window must have t_start < t_end");
    }
  }
}

inline bool blacked_out(const ScenarioSpec& s, const std::string& id, double t) {
  for (const auto& b : s.blackouts) {
    if (b.object_id == id && t >= b.t_start && t < b.t_end) return true;
  }
  return false;
}

}  // namespace detail

/// Synthesizes ground truth, IMU stream and per-frame object detections.
/// All outputs are expressed in W, the IMU frame at t = 0, so a default
/// filter initialization matches the true initial state. Deterministic for a
/// fixed seed.
inline SimulationOutput generate(const ScenarioSpec& scenario, const TrajectorySpec& traj) {
  detail::validate_scenario(scenario);
  const detail::TrajectoryEvaluator eval(traj);

  SimulationOutput out;
  out.truth_extrinsics = scenario.extrinsics;
  const Pose t_ic{scenario.extrinsics.p_ic, scenario.extrinsics.q_ic};

  // Re-express everything in the initial IMU frame. The yaw-only attitude
  // profile keeps gravity along -z in the new world.
  const Pose world_from_sim = eval.pose_at(0.0).inverse();
  for (const auto& obj : scenario.objects) {
    out.truth_objects.push_back(ObjectTruth{obj.id, world_from_sim * obj.pose});
  }

  const long n_imu = std::lround(scenario.imu_rate * traj.duration);
  const long n_cam = std::lround(scenario.cam_rate * traj.duration);
  const double imu_dt = 1.0 / scenario.imu_rate;

  SeededRng rng(scenario.seed);
  const double white_w = scenario.imu_noise.sigma_nw * std::sqrt(scenario.imu_rate);
  const double white_a = scenario.imu_noise.sigma_na * std::sqrt(scenario.imu_rate);
  const double walk_w = scenario.imu_noise.sigma_bw * std::sqrt(imu_dt);
  const double walk_a = scenario.imu_noise.sigma_ba * std::sqrt(imu_dt);

  Vec3 bias_w = Vec3::Zero();
  Vec3 bias_a = Vec3::Zero();
  out.imu_stream.reserve(n_imu);
  for (long i = 0; i < n_imu; ++i) {
    const double t = static_cast<double>(i) / scenario.imu_rate;
    const detail::TrajSample ts = eval.at(t);
    const Mat3 r_wsi = detail::TrajectoryEvaluator::yaw_quat(ts.yaw).toRotationMatrix();
    ImuSample sample;
    sample.t = t;
    sample.w_m = Vec3(0.0, 0.0, ts.yaw_rate);
    sample.a_m = r_wsi.transpose() * (ts.a - scenario.imu_noise.gravity);
    if (i > 0) {
      bias_w += walk_w * rng.gaussian3();
      bias_a += walk_a * rng.gaussian3();
    }
    sample.w_m += bias_w + white_w * rng.gaussian3();
    sample.a_m += bias_a + white_a * rng.gaussian3();
    out.imu_stream.push_back(sample);
  }

  out.frames.reserve(n_cam);
  out.outlier_ids.resize(n_cam);
  const double cos_fov = std::cos(scenario.fov_half_angle);
  for (long j = 0; j < n_cam; ++j) {
    const double t = static_cast<double>(j) / scenario.cam_rate;
    FrameMeasurement frame;
    frame.t = t;
    const Pose t_wsc = eval.pose_at(t) * t_ic;
    for (const auto& obj : scenario.objects) {
      const Pose t_co = t_wsc.inverse() * obj.pose;
      const double range = t_co.p.norm();
      if (t_co.p.z() <= 0.0 || range > scenario.max_range || t_co.p.z() < range * cos_fov) {
        continue;
      }
      if (detail::blacked_out(scenario, obj.id, t)) {
        continue;
      }
      ObjectPoseMeasurement det;
      det.t = t;
      det.object_id = obj.id;
      const bool outlier = rng.uniform() < scenario.outlier_rate;
      if (outlier) {
        det.p_co = t_co.p + scenario.outlier_pos * rng.unit_vector();
        det.q_co = quat_multiply(t_co.q, small_angle_quat(scenario.outlier_rot * rng.unit_vector()));
        out.outlier_ids[j].push_back(obj.id);
      } else {
        det.p_co = t_co.p + scenario.meas_noise.sigma_p * rng.gaussian3();
        det.q_co = quat_multiply(t_co.q, small_angle_quat(scenario.meas_noise.sigma_theta * rng.gaussian3()));
      }
      frame.detections.push_back(det);
    }
    out.frames.push_back(std::move(frame));
  }

  // Ground truth at every IMU and camera tick, deduplicated.
  std::vector<double> times;
  times.reserve(n_imu + n_cam);
  for (long i = 0; i < n_imu; ++i) times.push_back(static_cast<double>(i) / scenario.imu_rate);
  for (long j = 0; j < n_cam; ++j) times.push_back(static_cast<double>(j) / scenario.cam_rate);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  out.ground_truth.reserve(times.size());
  for (double t : times) {
    out.ground_truth.push_back(TimedPose{t, world_from_sim * eval.pose_at(t)});
  }
  return out;
}

struct ObjectStateSample {
  double t = 0.0;
  Pose pose;
  double cov_trace = 0.0;  // trace of the 6x6 object-world covariance block
};

struct ReplayResult {
  Trajectory estimate;
  std::vector<UpdateReport> reports;
  std::map<std::string, std::vector<ObjectStateSample>> object_history;
};

/// Called after every processed event; the report pointer is non-null for
/// frame events.
using ReplayObserver = std::function<void(const FilterState&, const MatX&, const UpdateReport*)>;

/// Feeds time-merged IMU and frame streams through a filter: propagation at
/// IMU rate (trapezoidally averaged consecutive samples), frame updates at
/// camera rate. Stream gaps beyond the propagation limit are split into
/// sub-steps with the measurement held.
inline ReplayResult replay(const std::vector<ImuSample>& imu,
                           const std::vector<FrameMeasurement>& frames, Filter& filter,
                           const FilterConfig& cfg, const ReplayObserver& observer = {}) {
  for (size_t i = 1; i < imu.size(); ++i) {
    if (!(imu[i].t > imu[i - 1].t)) throw std::invalid_argument("replay: IMU stream not sorted");
  }
  for (size_t i = 1; i < frames.size(); ++i) {
    if (!(frames[i].t > frames[i - 1].t)) throw std::invalid_argument("replay: frame stream not sorted");
  }

  ReplayResult result;
  const auto record_estimate = [&]() {
    const TimedPose tp{filter.state.t, Pose{filter.state.core.p_wi, filter.state.core.q_wi}};
    if (!result.estimate.empty() && result.estimate.back().t == tp.t) {
      result.estimate.back() = tp;
    } else {
      result.estimate.push_back(tp);
    }
  };
  const auto propagate_to = [&](double t, const ImuSample& held) {
    double dt = t - filter.state.t;
    if (dt <= 0.0) return;
    if (dt > kMaxPropagationDt) {
      const int n = static_cast<int>(std::ceil(dt / 0.01));
      const double sub = dt / n;
      for (int i = 0; i < n; ++i) {
        propagate(filter.state, filter.cov, held, sub, cfg.imu_noise);
      }
    } else {
      propagate(filter.state, filter.cov, held, dt, cfg.imu_noise);
    }
  };

  size_t i_imu = 0, i_frame = 0;
  bool have_prev = false;
  ImuSample prev;
  while (i_imu < imu.size() || i_frame < frames.size()) {
    const bool imu_next =
        i_imu < imu.size() &&
        (i_frame >= frames.size() || imu[i_imu].t <= frames[i_frame].t);
    if (imu_next) {
      const ImuSample& u = imu[i_imu++];
      if (have_prev) {
        ImuSample avg = u;
        avg.w_m = 0.5 * (prev.w_m + u.w_m);
        avg.a_m = 0.5 * (prev.a_m + u.a_m);
        propagate_to(u.t, avg);
      } else if (u.t > filter.state.t) {
        propagate_to(u.t, u);
      }
      prev = u;
      have_prev = true;
      record_estimate();
      if (observer) observer(filter.state, filter.cov, nullptr);
    } else {
      const FrameMeasurement& fr = frames[i_frame++];
      if (fr.t > filter.state.t && have_prev) {
        propagate_to(fr.t, prev);
      }
      const UpdateReport report = apply_frame(filter.state, filter.cov, fr, cfg);
      record_estimate();
      for (size_t k = 0; k < filter.state.objects.size(); ++k) {
        const ObjectWorldState& obj = filter.state.objects[k];
        if (!obj.initialized) continue;
        const int ok = idx::object(static_cast<int>(k));
        result.object_history[obj.id].push_back(ObjectStateSample{
            fr.t, Pose{obj.p_ow, obj.q_ow}, filter.cov.block<6, 6>(ok, ok).trace()});
      }
      if (observer) observer(filter.state, filter.cov, &report);
      result.reports.push_back(report);
    }
  }
  return result;
}

inline ReplayResult replay(const SimulationOutput& sim, Filter& filter, const FilterConfig& cfg,
                           const ReplayObserver& observer = {}) {
  return replay(sim.imu_stream, sim.frames, filter, cfg, observer);
}

}  // namespace orel
