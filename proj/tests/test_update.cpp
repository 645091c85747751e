#include "orel/update.hpp"

#include <gtest/gtest.h>

#include <Eigen/Cholesky>

#include "orel/rng.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace orel {
namespace {

using test::MatNear;
using test::perfect_measurement;
using test::TestRandom;
using test::VecNear;

FilterConfig config_3obj() {
  FilterConfig cfg;
  cfg.object_ids = {"a", "b", "c"};
  cfg.anchor_id = "a";
  return cfg;
}

FilterState random_state(TestRandom& rnd, bool init_objects = true) {
  return test::random_filter_state(config_3obj(), rnd, init_objects);
}

TEST(InvertMeasurement, KnownCases) {
  ObjectPoseMeasurement m;
  m.object_id = "a";
  Pose inv = invert_measurement(m);
  EXPECT_TRUE(VecNear(inv.p, Vec3::Zero(), 0.0));

  m.p_co = Vec3(1.0, 2.0, 3.0);
  inv = invert_measurement(m);
  EXPECT_TRUE(VecNear(inv.p, Vec3(-1.0, -2.0, -3.0), 1e-15));
}

TEST(InvertMeasurement, ComposesToIdentity) {
  TestRandom rnd(31);
  for (int i = 0; i < 50; ++i) {
    ObjectPoseMeasurement m;
    m.p_co = rnd.vec3(2.0);
    m.q_co = rnd.quat();
    const Pose composed = Pose{m.p_co, m.q_co} * invert_measurement(m);
    EXPECT_TRUE(VecNear(composed.p, Vec3::Zero(), 1e-12));
    EXPECT_LT(test::quat_angle_between(composed.q, Quat::Identity()), 1e-12);
  }
}

TEST(PredictMeasurement, KnownCases) {
  Filter f = new_filter(config_3obj());
  for (auto& obj : f.state.objects) obj.initialized = true;
  Pose z = predict_measurement(f.state, 0);
  EXPECT_TRUE(VecNear(z.p, Vec3::Zero(), 0.0));
  EXPECT_LT(test::quat_angle_between(z.q, Quat::Identity()), 1e-15);

  f.state.core.p_wi = Vec3(1.0, 0.0, 0.0);
  z = predict_measurement(f.state, 1);
  EXPECT_TRUE(VecNear(z.p, Vec3(1.0, 0.0, 0.0), 1e-15));
}

TEST(PredictMeasurement, MatchesTransformChainOracle) {
  TestRandom rnd(32);
  for (int i = 0; i < 50; ++i) {
    const FilterState s = random_state(rnd);
    for (int k = 0; k < 3; ++k) {
      const Pose t_okc =
          Pose{s.objects[k].p_ow, s.objects[k].q_ow} * Pose{s.core.p_wi, s.core.q_wi} *
          Pose{s.extrinsics.p_ic, s.extrinsics.q_ic};
      const Pose z = predict_measurement(s, k);
      EXPECT_TRUE(VecNear(z.p, t_okc.p, 1e-12));
      EXPECT_LT(test::quat_angle_between(z.q, t_okc.q), 1e-12);
    }
  }
}

TEST(PredictMeasurement, UninitializedThrows) {
  Filter f = new_filter(config_3obj());
  EXPECT_THROW(predict_measurement(f.state, 0), std::logic_error);
}

TEST(Residual, ZeroForConsistentMeasurement) {
  TestRandom rnd(33);
  for (int i = 0; i < 50; ++i) {
    const FilterState s = random_state(rnd);
    for (int k = 0; k < 3; ++k) {
      const auto r = residual(perfect_measurement(s, k), s, k);
      ASSERT_TRUE(r.has_value());
      EXPECT_LT(r->norm(), 1e-9);
    }
  }
}

TEST(Residual, RotationClosedForm) {
  Filter f = new_filter(config_3obj());
  for (auto& obj : f.state.objects) obj.initialized = true;
  // Prediction is identity; measured rotation error of 10 deg about z appears
  // as 2*tan(5 deg). The detection reports T_CO = T_OC^-1.
  const Quat q_oc = small_angle_quat(Vec3(0.0, 0.0, 10.0 * M_PI / 180.0));
  ObjectPoseMeasurement m;
  m.object_id = "b";
  m.q_co = q_oc.conjugate();
  m.p_co = Vec3::Zero();
  const auto r = residual(m, f.state, 1);
  ASSERT_TRUE(r.has_value());
  EXPECT_NEAR((*r)(5), 2.0 * std::tan(5.0 * M_PI / 180.0), 1e-12);
  EXPECT_NEAR(r->head<3>().norm(), 0.0, 1e-15);
}

TEST(Residual, Near180IsRejected) {
  Filter f = new_filter(config_3obj());
  for (auto& obj : f.state.objects) obj.initialized = true;
  ObjectPoseMeasurement m;
  m.object_id = "a";
  m.q_co = small_angle_quat(Vec3(179.9 * M_PI / 180.0, 0.0, 0.0));
  EXPECT_FALSE(residual(m, f.state, 0).has_value());
}

TEST(Jacobian, AllIdentityState) {
  Filter f = new_filter(config_3obj());
  f.state.extrinsics.p_ic = Vec3(0.1, -0.2, 0.3);
  for (auto& obj : f.state.objects) obj.initialized = true;
  const MatX h = measurement_jacobian(f.state, 1);
  EXPECT_TRUE(MatNear(h.block<3, 3>(0, idx::kPos), Mat3::Identity(), 1e-15));
  EXPECT_TRUE(MatNear(h.block<3, 3>(0, idx::kAtt), -skew(f.state.extrinsics.p_ic), 1e-15));
  EXPECT_TRUE(MatNear(h.block<3, 3>(3, idx::kAtt), Mat3::Identity(), 1e-15));
  EXPECT_TRUE(MatNear(h.block<3, 3>(3, idx::kExtAtt), Mat3::Identity(), 1e-15));
  EXPECT_TRUE(MatNear(h.block<3, 3>(0, idx::object(1)), Mat3::Identity(), 1e-15));
}

TEST(Jacobian, AnchorColumnsZero) {
  TestRandom rnd(34);
  const FilterState s = random_state(rnd);
  const MatX h = measurement_jacobian(s, 0);  // "a" is the anchor
  EXPECT_TRUE(MatNear(h.block<6, 6>(0, idx::object(0)), Eigen::Matrix<double, 6, 6>::Zero(), 0.0));
}

TEST(Jacobian, MatchesFiniteDifferences) {
  TestRandom rnd(35);
  for (int trial = 0; trial < 100; ++trial) {
    const FilterState s = random_state(rnd);
    test::expect_jacobian_matches_fd(s, trial % 3);
  }
}

TEST(Chi2Gate, ZeroResidualAccepts) {
  TestRandom rnd(36);
  const FilterState s = random_state(rnd);
  Filter f = new_filter(config_3obj());
  const MatX h = measurement_jacobian(s, 1);
  Mat6 r_meas = 0.01 * Mat6::Identity();
  const GateResult g = chi2_gate(Vec6::Zero(), h, f.cov, r_meas, kChi2Gate6Dof95);
  EXPECT_TRUE(g.accept);
  EXPECT_EQ(g.statistic, 0.0);
}

TEST(Chi2Gate, ThresholdBoundary) {
  // With S forced to identity the statistic is |r|^2; 20 > 12.59 rejects.
  const FilterState s = [] {
    TestRandom rnd(37);
    return random_state(rnd);
  }();
  const int dim = s.error_dim();
  MatX h = MatX::Zero(6, dim);  // S = R
  Vec6 r;
  r << std::sqrt(20.0), 0, 0, 0, 0, 0;
  const GateResult g = chi2_gate(r, h, MatX::Identity(dim, dim), Mat6::Identity(), kChi2Gate6Dof95);
  EXPECT_FALSE(g.accept);
  EXPECT_NEAR(g.statistic, 20.0, 1e-9);

  Vec6 r_ok;
  r_ok << std::sqrt(12.0), 0, 0, 0, 0, 0;
  EXPECT_TRUE(chi2_gate(r_ok, h, MatX::Identity(dim, dim), Mat6::Identity(), kChi2Gate6Dof95).accept);
}

TEST(Chi2Gate, MonteCarloAcceptanceRate) {
  TestRandom rnd(38);
  const FilterState s = random_state(rnd);
  Filter f = new_filter(config_3obj());
  const MatX h = measurement_jacobian(s, 1);
  Mat6 r_meas = Mat6::Identity() * 0.01;
  const Mat6 s_inn = h * f.cov * h.transpose() + r_meas;
  const Eigen::LLT<Mat6> llt(s_inn);
  ASSERT_EQ(llt.info(), Eigen::Success);
  const Mat6 chol = llt.matrixL();

  SeededRng noise(4242);
  const int trials = 10000;
  int accepted = 0;
  for (int i = 0; i < trials; ++i) {
    Vec6 n;
    for (int j = 0; j < 6; ++j) n(j) = noise.gaussian();
    const Vec6 r = chol * n;  // r ~ N(0, S)
    if (chi2_gate(r, h, f.cov, r_meas, kChi2Gate6Dof95).accept) ++accepted;
  }
  const double rate = static_cast<double>(accepted) / trials;
  EXPECT_NEAR(rate, 0.95, 0.02);
}

TEST(InitObjectWorld, IdentityCase) {
  Filter f = new_filter(config_3obj());
  ObjectPoseMeasurement m;
  m.object_id = "a";
  init_object_world(f.state, f.cov, m, 0, config_3obj());
  EXPECT_TRUE(f.state.objects[0].initialized);
  EXPECT_TRUE(VecNear(f.state.objects[0].p_ow, Vec3::Zero(), 1e-15));
  EXPECT_LT(test::quat_angle_between(f.state.objects[0].q_ow, Quat::Identity()), 1e-15);
}

TEST(InitObjectWorld, RoundTripsThroughPrediction) {
  TestRandom rnd(39);
  for (int i = 0; i < 30; ++i) {
    Filter f = new_filter(config_3obj());
    FilterState truth = random_state(rnd);
    // Current estimate has the truth's core/extrinsics but no objects.
    f.state.core = truth.core;
    f.state.extrinsics = truth.extrinsics;

    const ObjectPoseMeasurement m_anchor = perfect_measurement(truth, 0);
    init_object_world(f.state, f.cov, m_anchor, 0, config_3obj());
    const ObjectPoseMeasurement m = perfect_measurement(truth, 1);
    init_object_world(f.state, f.cov, m, 1, config_3obj());

    const Pose z = predict_measurement(f.state, 1);
    const Pose z_meas = invert_measurement(m);
    EXPECT_TRUE(VecNear(z.p, z_meas.p, 1e-9));
    EXPECT_LT(test::quat_angle_between(z.q, z_meas.q), 1e-9);
  }
}

TEST(InitObjectWorld, AnchorBlockZeroNonAnchorPrior) {
  Filter f = new_filter(config_3obj());
  const FilterConfig cfg = config_3obj();
  ObjectPoseMeasurement m;
  m.object_id = "a";
  init_object_world(f.state, f.cov, m, 0, cfg);
  EXPECT_TRUE(MatNear(f.cov.block(idx::object(0), 0, 6, f.cov.cols()),
                      MatX::Zero(6, f.cov.cols()), 0.0));
  EXPECT_TRUE(MatNear(f.cov.block(0, idx::object(0), f.cov.rows(), 6),
                      MatX::Zero(f.cov.rows(), 6), 0.0));

  m.object_id = "b";
  init_object_world(f.state, f.cov, m, 1, cfg);
  EXPECT_NEAR(f.cov(idx::object(1), idx::object(1)),
              cfg.object_prior_sigma_p * cfg.object_prior_sigma_p, 1e-12);
  EXPECT_NEAR(f.cov(idx::object(1) + 3, idx::object(1) + 3),
              cfg.object_prior_sigma_att * cfg.object_prior_sigma_att, 1e-12);
}

TEST(InitObjectWorld, OrderingAndDoubleInitErrors) {
  Filter f = new_filter(config_3obj());
  const FilterConfig cfg = config_3obj();
  ObjectPoseMeasurement m;
  m.object_id = "b";
  EXPECT_THROW(init_object_world(f.state, f.cov, m, 1, cfg), std::logic_error);

  m.object_id = "a";
  init_object_world(f.state, f.cov, m, 0, cfg);
  EXPECT_THROW(init_object_world(f.state, f.cov, m, 0, cfg), std::logic_error);
}

// --- apply_frame ---

struct Scene {
  Filter filter;
  FilterState truth;
  FilterConfig cfg;
};

// A filter whose objects are initialized and whose state sits near (or at)
// the truth that generates measurements.
Scene make_scene(TestRandom& rnd, bool exact = true) {
  Scene sc{new_filter(config_3obj()), FilterState{}, config_3obj()};
  sc.truth = random_state(rnd);
  sc.filter.state.core = sc.truth.core;
  sc.filter.state.extrinsics = sc.truth.extrinsics;
  FrameMeasurement frame;
  frame.t = 0.0;
  for (int k = 0; k < 3; ++k) frame.detections.push_back(perfect_measurement(sc.truth, k));
  apply_frame(sc.filter.state, sc.filter.cov, frame, sc.cfg);  // initializes all objects
  if (!exact) {
    // Nudge the filter away from truth so residuals are small but nonzero;
    // small enough that relinearization effects stay below the comparison
    // tolerances of the linear-regime tests.
    VecX d = VecX::Zero(sc.filter.state.error_dim());
    for (int i = 0; i < d.size(); ++i) d(i) = rnd.gaussian(1e-6);
    inject_error(sc.filter.state, d);
  }
  return sc;
}

TEST(ApplyFrame, SkipsWithoutAnchorBitIdentical) {
  TestRandom rnd(40);
  Scene sc = make_scene(rnd);
  const FilterState before = sc.filter.state;
  const MatX cov_before = sc.filter.cov;

  FrameMeasurement frame;
  frame.t = sc.filter.state.t;
  frame.detections.push_back(perfect_measurement(sc.truth, 1));
  frame.detections.push_back(perfect_measurement(sc.truth, 2));
  const UpdateReport rep = apply_frame(sc.filter.state, sc.filter.cov, frame, sc.cfg);

  EXPECT_FALSE(rep.applied);
  EXPECT_EQ(rep.skip_reason, FrameSkipReason::kAnchorNotVisible);
  EXPECT_EQ(rep.detections.size(), 2u);
  EXPECT_EQ(before.core.p_wi, sc.filter.state.core.p_wi);
  EXPECT_EQ(before.core.q_wi.coeffs(), sc.filter.state.core.q_wi.coeffs());
  EXPECT_EQ(before.t, sc.filter.state.t);
  EXPECT_TRUE(MatNear(cov_before, sc.filter.cov, 0.0));
}

TEST(ApplyFrame, ZeroResidualContractsCovariance) {
  TestRandom rnd(41);
  Scene sc = make_scene(rnd);
  const FilterState before = sc.filter.state;
  const double trace_before = sc.filter.cov.trace();

  FrameMeasurement frame;
  frame.t = sc.filter.state.t;
  for (int k = 0; k < 3; ++k) frame.detections.push_back(perfect_measurement(sc.truth, k));
  const UpdateReport rep = apply_frame(sc.filter.state, sc.filter.cov, frame, sc.cfg);

  EXPECT_TRUE(rep.applied);
  EXPECT_EQ(rep.n_accepted, 3);
  EXPECT_LT((before.core.p_wi - sc.filter.state.core.p_wi).norm(), 1e-12);
  EXPECT_LT(test::quat_angle_between(before.core.q_wi, sc.filter.state.core.q_wi), 1e-12);
  EXPECT_LT(sc.filter.cov.trace(), trace_before);
}

TEST(ApplyFrame, OutlierRejectedEqualsInlierOnlyUpdate) {
  TestRandom rnd(42);
  Scene sc = make_scene(rnd);
  Filter twin = sc.filter;

  ObjectPoseMeasurement inlier = perfect_measurement(sc.truth, 1);
  ObjectPoseMeasurement anchor_det = perfect_measurement(sc.truth, 0);
  ObjectPoseMeasurement outlier = perfect_measurement(sc.truth, 2);
  outlier.p_co += Vec3(5.0, 0.0, 0.0);

  FrameMeasurement with_outlier;
  with_outlier.t = sc.filter.state.t;
  with_outlier.detections = {anchor_det, inlier, outlier};
  const UpdateReport rep = apply_frame(sc.filter.state, sc.filter.cov, with_outlier, sc.cfg);
  EXPECT_TRUE(rep.applied);
  ASSERT_EQ(rep.detections.size(), 3u);
  EXPECT_TRUE(rep.detections[0].accepted);
  EXPECT_TRUE(rep.detections[1].accepted);
  EXPECT_FALSE(rep.detections[2].accepted);
  EXPECT_EQ(rep.detections[2].reason, RejectReason::kChi2);

  FrameMeasurement inliers_only;
  inliers_only.t = twin.state.t;
  inliers_only.detections = {anchor_det, inlier};
  apply_frame(twin.state, twin.cov, inliers_only, sc.cfg);

  // Masking the outlier must give exactly the inlier-only update.
  EXPECT_EQ(twin.state.core.p_wi, sc.filter.state.core.p_wi);
  EXPECT_EQ(twin.state.core.q_wi.coeffs(), sc.filter.state.core.q_wi.coeffs());
  EXPECT_EQ(twin.state.objects[1].p_ow, sc.filter.state.objects[1].p_ow);
  EXPECT_TRUE(MatNear(twin.cov, sc.filter.cov, 0.0));
}

TEST(ApplyFrame, Deterministic) {
  TestRandom rnd(43);
  Scene sc = make_scene(rnd, /*exact=*/false);
  Filter twin = sc.filter;

  FrameMeasurement frame;
  frame.t = sc.filter.state.t;
  for (int k = 0; k < 3; ++k) frame.detections.push_back(perfect_measurement(sc.truth, k));
  apply_frame(sc.filter.state, sc.filter.cov, frame, sc.cfg);
  apply_frame(twin.state, twin.cov, frame, sc.cfg);

  EXPECT_EQ(sc.filter.state.core.p_wi, twin.state.core.p_wi);
  EXPECT_EQ(sc.filter.state.core.v_wi, twin.state.core.v_wi);
  EXPECT_EQ(sc.filter.state.core.q_wi.coeffs(), twin.state.core.q_wi.coeffs());
  EXPECT_TRUE(MatNear(sc.filter.cov, twin.cov, 0.0));
}

// Test-side EKF oracle: one single-object Kalman step in Joseph form,
// written independently of apply_frame.
void oracle_single_update(FilterState& s, MatX& cov, const ObjectPoseMeasurement& det,
                          const FilterConfig& cfg) {
  const int k = s.object_index(det.object_id);
  const Vec6 r = *residual(det, s, k);
  const MatX h = measurement_jacobian(s, k);
  Mat6 r_meas = Mat6::Zero();
  r_meas.topLeftCorner<3, 3>() = cfg.meas_noise.sigma_p * cfg.meas_noise.sigma_p * Mat3::Identity();
  r_meas.bottomRightCorner<3, 3>() =
      cfg.meas_noise.sigma_theta * cfg.meas_noise.sigma_theta * Mat3::Identity();
  const Mat6 s_inn = h * cov * h.transpose() + r_meas;
  const MatX gain = cov * h.transpose() * s_inn.inverse();
  inject_error(s, gain * r);
  const MatX ikh = MatX::Identity(cov.rows(), cov.cols()) - gain * h;
  cov = ikh * cov * ikh.transpose() + gain * r_meas * gain.transpose();
  symmetrize(cov);
}

TEST(ApplyFrame, StackedMatchesSequentialInLinearRegime) {
  TestRandom rnd(44);
  for (int trial = 0; trial < 5; ++trial) {
    Scene sc = make_scene(rnd, /*exact=*/false);
    Filter seq = sc.filter;

    FrameMeasurement stacked;
    stacked.t = sc.filter.state.t;
    for (int k = 0; k < 3; ++k) stacked.detections.push_back(perfect_measurement(sc.truth, k));
    apply_frame(sc.filter.state, sc.filter.cov, stacked, sc.cfg);

    for (const auto& det : stacked.detections) {
      oracle_single_update(seq.state, seq.cov, det, sc.cfg);
    }

    EXPECT_LT((seq.state.core.p_wi - sc.filter.state.core.p_wi).norm(), 1e-6);
    EXPECT_LT((seq.state.core.v_wi - sc.filter.state.core.v_wi).norm(), 1e-6);
    EXPECT_LT(test::quat_angle_between(seq.state.core.q_wi, sc.filter.state.core.q_wi), 1e-6);
    EXPECT_LT((seq.state.objects[1].p_ow - sc.filter.state.objects[1].p_ow).norm(), 1e-6);
    // Covariance agreement is relative to its scale (object priors are 1e2).
    EXPECT_TRUE(MatNear(seq.cov, sc.filter.cov, 1e-6 * std::max(1.0, sc.filter.cov.cwiseAbs().maxCoeff())));
  }
}

TEST(ApplyFrame, ErrorsOnMalformedInput) {
  TestRandom rnd(45);
  Scene sc = make_scene(rnd);
  FrameMeasurement frame;
  frame.t = sc.filter.state.t;
  frame.detections = {perfect_measurement(sc.truth, 0), perfect_measurement(sc.truth, 0)};
  EXPECT_THROW(apply_frame(sc.filter.state, sc.filter.cov, frame, sc.cfg), std::invalid_argument);

  frame.detections = {perfect_measurement(sc.truth, 0)};
  frame.detections[0].object_id = "ghost";
  EXPECT_THROW(apply_frame(sc.filter.state, sc.filter.cov, frame, sc.cfg), std::invalid_argument);

  frame.detections = {perfect_measurement(sc.truth, 0)};
  frame.t = sc.filter.state.t - 1.0;
  EXPECT_THROW(apply_frame(sc.filter.state, sc.filter.cov, frame, sc.cfg), std::invalid_argument);
}

TEST(ApplyFrame, PosteriorChi2NotLarger) {
  TestRandom rnd(46);
  for (int trial = 0; trial < 10; ++trial) {
    Scene sc = make_scene(rnd, /*exact=*/false);
    const ObjectPoseMeasurement det = perfect_measurement(sc.truth, 1);
    const int k = 1;

    Mat6 r_meas = Mat6::Zero();
    r_meas.topLeftCorner<3, 3>() = sc.cfg.meas_noise.sigma_p * sc.cfg.meas_noise.sigma_p * Mat3::Identity();
    r_meas.bottomRightCorner<3, 3>() =
        sc.cfg.meas_noise.sigma_theta * sc.cfg.meas_noise.sigma_theta * Mat3::Identity();

    const Vec6 r_prior = *residual(det, sc.filter.state, k);
    const MatX h = measurement_jacobian(sc.filter.state, k);
    const MatX cov_prior = sc.filter.cov;
    const GateResult prior = chi2_gate(r_prior, h, cov_prior, r_meas, 1e300);

    FrameMeasurement frame;
    frame.t = sc.filter.state.t;
    frame.detections = {perfect_measurement(sc.truth, 0), det};
    apply_frame(sc.filter.state, sc.filter.cov, frame, sc.cfg);

    const Vec6 r_post = *residual(det, sc.filter.state, k);
    const GateResult post = chi2_gate(r_post, h, cov_prior, r_meas, 1e300);
    EXPECT_LE(post.statistic, prior.statistic + 1e-6);
  }
}

TEST(ApplyFrame, AnchorInvariantAcrossUpdates) {
  TestRandom rnd(47);
  Scene sc = make_scene(rnd);
  const Eigen::Vector4d anchor_q = sc.filter.state.objects[0].q_ow.coeffs();
  const Vec3 anchor_p = sc.filter.state.objects[0].p_ow;

  for (int i = 0; i < 50; ++i) {
    FrameMeasurement frame;
    frame.t = sc.filter.state.t;
    for (int k = 0; k < 3; ++k) {
      ObjectPoseMeasurement det = perfect_measurement(sc.truth, k);
      det.p_co += rnd.vec3(0.05);
      det.q_co = quat_multiply(det.q_co, small_angle_quat(rnd.vec3(0.05)));
      frame.detections.push_back(det);
    }
    apply_frame(sc.filter.state, sc.filter.cov, frame, sc.cfg);

    EXPECT_EQ(sc.filter.state.objects[0].p_ow, anchor_p);
    EXPECT_EQ(sc.filter.state.objects[0].q_ow.coeffs(), anchor_q);
    const int a0 = idx::object(0);
    EXPECT_TRUE(MatNear(sc.filter.cov.block(a0, 0, 6, sc.filter.cov.cols()),
                        MatX::Zero(6, sc.filter.cov.cols()), 0.0));
  }
}

TEST(ApplyFrame, InitializesAnchorFirstWhenAllNew) {
  TestRandom rnd(48);
  Filter f = new_filter(config_3obj());
  FilterState truth = random_state(rnd);
  f.state.core = truth.core;
  f.state.extrinsics = truth.extrinsics;

  FrameMeasurement frame;
  frame.t = 0.0;
  // "b" sorts before... actually "a" is the anchor and sorts first anyway;
  // shuffle input order to make sure ordering does not depend on it.
  frame.detections = {perfect_measurement(truth, 2), perfect_measurement(truth, 0),
                      perfect_measurement(truth, 1)};
  const UpdateReport rep = apply_frame(f.state, f.cov, frame, config_3obj());
  EXPECT_TRUE(rep.applied);
  EXPECT_EQ(rep.n_initialized, 3);
  for (const auto& obj : f.state.objects) EXPECT_TRUE(obj.initialized);
  // Residuals of the init frame are zero, so the state core is untouched.
  EXPECT_LT((f.state.core.p_wi - truth.core.p_wi).norm(), 1e-9);
}

TEST(ApplyFrame, UninitializedObjectWithoutAnchorStaysUninitialized) {
  TestRandom rnd(49);
  Filter f = new_filter(config_3obj());
  FilterState truth = random_state(rnd);
  f.state.core = truth.core;
  f.state.extrinsics = truth.extrinsics;

  FrameMeasurement frame;
  frame.t = 0.0;
  frame.detections = {perfect_measurement(truth, 1)};
  const UpdateReport rep = apply_frame(f.state, f.cov, frame, config_3obj());
  EXPECT_FALSE(rep.applied);
  EXPECT_EQ(rep.skip_reason, FrameSkipReason::kAnchorNotVisible);
  EXPECT_FALSE(f.state.objects[1].initialized);
}

}  // namespace
}  // namespace orel
