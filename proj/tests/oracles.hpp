#pragma once

#include "orel/state.hpp"
#include "orel/update.hpp"
#include "test_util.hpp"

namespace orel::test {

/// Generic pose-composition forward model, independent of the update module's
/// formulas: T_OkC = T_OkW * T_WI * T_IC, the detection is its inverse.
inline ObjectPoseMeasurement perfect_measurement(const FilterState& s, int k, double t = 0.0) {
  const Pose t_okw{s.objects[k].p_ow, s.objects[k].q_ow};
  const Pose t_wi{s.core.p_wi, s.core.q_wi};
  const Pose t_ic{s.extrinsics.p_ic, s.extrinsics.q_ic};
  const Pose t_co = (t_okw * t_wi * t_ic).inverse();
  ObjectPoseMeasurement m;
  m.t = t;
  m.object_id = s.objects[k].id;
  m.p_co = t_co.p;
  m.q_co = t_co.q;
  return m;
}

inline FilterState random_filter_state(const FilterConfig& cfg, TestRandom& rnd,
                                       bool init_objects = true) {
  FilterState s = new_filter(cfg).state;
  s.core.p_wi = rnd.vec3(2.0);
  s.core.v_wi = rnd.vec3(1.0);
  s.core.q_wi = rnd.quat();
  s.core.b_w = rnd.vec3(0.01);
  s.core.b_a = rnd.vec3(0.05);
  s.extrinsics.p_ic = rnd.vec3(0.1);
  s.extrinsics.q_ic = rnd.quat();
  if (init_objects) {
    for (auto& obj : s.objects) {
      obj.p_ow = rnd.vec3(3.0);
      obj.q_ow = rnd.quat();
      obj.initialized = true;
    }
  }
  return s;
}

/// Central finite differences of the measurement function through error
/// injection, in the same residual chart the filter uses.
inline MatX fd_measurement_jacobian(const FilterState& s, int k, double step) {
  const Pose z0 = predict_measurement(s, k);
  const int dim = s.error_dim();
  MatX fd(6, dim);
  for (int j = 0; j < dim; ++j) {
    FilterState sp = s;
    FilterState sm = s;
    VecX d = VecX::Zero(dim);
    d(j) = step;
    inject_error(sp, d);
    d(j) = -step;
    inject_error(sm, d);
    const Pose zp = predict_measurement(sp, k);
    const Pose zm = predict_measurement(sm, k);
    fd.col(j).head<3>() = (zp.p - zm.p) / (2.0 * step);
    const Vec3 rp = *quat_residual_to_rotvec(z0.q.conjugate() * zp.q);
    const Vec3 rm = *quat_residual_to_rotvec(z0.q.conjugate() * zm.q);
    fd.col(j).tail<3>() = (rp - rm) / (2.0 * step);
  }
  return fd;
}

/// Compares every block of the analytic Jacobian against finite differences:
/// 1e-4 relative on nonzero blocks, 1e-8 absolute on structurally zero ones.
/// The anchor's own gauge-fixed columns are asserted zero and skipped.
inline void expect_jacobian_matches_fd(const FilterState& s, int k) {
  const MatX h = measurement_jacobian(s, k);
  const MatX fd = fd_measurement_jacobian(s, k, 1e-6);
  const bool is_anchor = s.objects[k].is_anchor;
  const int own = idx::object(k);
  for (int c = 0; c < h.cols(); ++c) {
    const bool anchor_own_col = is_anchor && c >= own && c < own + 6;
    for (int r = 0; r < 6; ++r) {
      if (anchor_own_col) {
        EXPECT_EQ(h(r, c), 0.0);
        continue;
      }
      if (h(r, c) == 0.0) {
        EXPECT_LT(std::abs(fd(r, c)), 1e-8) << "zero block at (" << r << "," << c << ")";
      } else {
        EXPECT_NEAR(fd(r, c), h(r, c), 1e-4 * std::max(1.0, std::abs(h(r, c))))
            << "block at (" << r << "," << c << ")";
      }
    }
  }
}

}  // namespace orel::test
