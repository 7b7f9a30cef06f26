#include <gtest/gtest.h>

#include <cmath>

#include "chf/sds_control.hpp"

using namespace chf;

namespace {

Vec vec2(double a, double b) { return (Vec(2) << a, b).finished(); }

SdsController identity_ctrl(int n, double gain) {
  return SdsController(AffineIdModel::constant(Mat::Identity(n, n)), AffineIdModel::constant(Mat::Identity(n, n)),
                       gain, n);
}

SdsController scaled_ctrl(double a_hat, double b_hat, double gain) {
  return SdsController(AffineIdModel::constant(b_hat * Mat::Identity(2, 2)),
                       AffineIdModel::constant(a_hat * Mat::Identity(2, 2)), gain, 2);
}

Mat rotation(double a) { return (Mat(2, 2) << std::cos(a), -std::sin(a), std::sin(a), std::cos(a)).finished(); }

const Vec kX0 = vec2(0.5, 0.0);

}  // namespace

TEST(Feedforward, IdentityModelDifference) {
  auto c = identity_ctrl(2, 1.0);
  Vec u = feedforward(c, Vec::Zero(2), vec2(1, 0), vec2(2, 0));
  EXPECT_EQ(u, vec2(1, 0));
}

TEST(Feedforward, PerfectTrackingCancels) {
  SdsController c(AffineIdModel::constant(Mat::Identity(2, 2)),
                  AffineIdModel::constant((Mat(2, 2) << 3, 1, -2, 5).finished(), vec2(7, -7)), 1.0, 2);
  EXPECT_EQ(feedforward(c, vec2(0.3, 0.1), vec2(0.4, -1), vec2(0.4, -1)), Vec::Zero(2));
}

TEST(Feedforward, StateDependentModel) {
  AffineIdModel psi{[](const Vec& x) { return Mat((Vec(2) << 1 + x[0] * x[0], 1).finished().asDiagonal()); },
                    [](const Vec&) { return Vec(Vec::Zero(2)); }};
  SdsController c(AffineIdModel::constant(Mat::Identity(2, 2)), psi, 1.0, 2);
  Vec x = vec2(1, 0), xd = vec2(0.5, -0.25), v = xd + vec2(1, 1);
  Vec expect = vec2((1 + 1.0 * 1.0) * 1.0, 1.0);
  EXPECT_LT((feedforward(c, x, xd, v) - expect).norm(), 1e-15);
}

TEST(FeedbackStep, OneExplicitStep) {
  auto c = identity_ctrl(1, 2.0);
  feedback_step(c, Vec::Zero(1), Vec::Zero(1), Vec::Constant(1, 2.0), 0.5);
  EXPECT_DOUBLE_EQ(c.w[0], 2.0);
}

TEST(FeedbackStep, PerfectTrackingLeavesW) {
  auto c = identity_ctrl(2, 3.0);
  c.w = vec2(0.25, -1);
  feedback_step(c, Vec::Zero(2), vec2(1, 2), vec2(1, 2), 0.1);
  EXPECT_EQ(c.w, vec2(0.25, -1));
}

TEST(FeedbackStep, IntegralOracle) {
  auto c = identity_ctrl(1, 1.0);
  for (int i = 0; i < 1000; ++i) feedback_step(c, Vec::Zero(1), Vec::Zero(1), Vec::Ones(1), 1e-3);
  EXPECT_NEAR(c.w[0], 1.0, 1e-3);
}

TEST(FeedbackStep, NonFiniteDiverges) {
  auto c = identity_ctrl(1, 1.0);
  EXPECT_THROW(feedback_step(c, Vec::Zero(1), Vec::Zero(1), Vec::Constant(1, INFINITY), 1e-3), ControllerDiverged);
}

TEST(ControlOutput, ZeroAtRest) {
  auto c = identity_ctrl(2, 1.0);
  EXPECT_EQ(control_output(c, Vec::Zero(2), vec2(1, 1), vec2(1, 1)), Vec::Zero(2));
}

TEST(ControlOutput, AdditiveComposition) {
  auto c = identity_ctrl(1, 1.0);
  c.w = Vec::Constant(1, 3.0);
  EXPECT_DOUBLE_EQ(control_output(c, Vec::Zero(1), Vec::Zero(1), Vec::Ones(1))[0], 4.0);
}

TEST(ControlOutput, RejectsNonPositiveGain) {
  EXPECT_THROW(identity_ctrl(1, 0.0), InvalidConfig);
  EXPECT_THROW(identity_ctrl(1, -1.0), InvalidConfig);
}

TEST(SubtractionRule, PackagesDesiredAndExperienced) {
  auto m = AffineIdModel::constant(2 * Mat::Identity(2, 2), vec2(1, 1));
  auto p = subtraction_rule(m, Vec::Zero(2), vec2(1, 0), vec2(3, 1));
  EXPECT_EQ(p.desired, vec2(7, 3));
  EXPECT_EQ(p.experienced, vec2(3, 1));
  EXPECT_EQ(p.difference(), 2 * vec2(2, 1));
}

TEST(ClosedLoop, ConvergesTowardOrigin) {
  Plant p = linear_plant(Mat::Identity(2, 2), Vec::Zero(2), Box::unbounded(2));
  auto v = linear_field(-Mat::Identity(2, 2));
  TrackOptions opt;
  opt.T = 10;
  opt.dt = 1e-3;
  opt.record_every = 100;
  auto rec = track_speed_field(p, scaled_ctrl(0.5, 0.5, 4.0), v, vec2(1, -1), opt);
  EXPECT_LT(rec.final_x.norm(), 1e-3);
  EXPECT_LT(rec.asymptotic_error, 1e-3);
  EXPECT_LT(rec.asymptotic_error, rec.e_norm.front());
}

TEST(CheckUniformPd, Identity) {
  FieldPair fp{"I,I", [](const Vec&) { return Mat(Mat::Identity(2, 2)); },
               [](const Vec&) { return Mat(Mat::Identity(2, 2)); }};
  auto r = check_uniform_pd({fp}, Box::symmetric(2, 1), 50);
  EXPECT_TRUE(r.verdict);
  EXPECT_NEAR(r.min_eigenvalue_observed, 1.0, 1e-12);
}

TEST(CheckUniformPd, SignImproper) {
  FieldPair fp{"I,-I", [](const Vec&) { return Mat(Mat::Identity(2, 2)); },
               [](const Vec&) { return Mat(-Mat::Identity(2, 2)); }};
  auto r = check_uniform_pd({fp}, Box::symmetric(2, 1), 50);
  EXPECT_FALSE(r.verdict);
  EXPECT_NEAR(r.min_eigenvalue_observed, -1.0, 1e-12);
  EXPECT_FALSE(r.failed_points.empty());
  EXPECT_EQ(r.failed_pairs.front(), "I,-I");
}

TEST(CheckUniformPd, Rotation45) {
  FieldPair fp{"R,I", [](const Vec&) { return rotation(M_PI / 4); },
               [](const Vec&) { return Mat(Mat::Identity(2, 2)); }};
  auto r = check_uniform_pd({fp}, Box::symmetric(2, 1), 10);
  EXPECT_NEAR(r.min_eigenvalue_observed, std::cos(M_PI / 4), 1e-12);
}

TEST(CheckUniformPd, ArmBenchmarkPairs) {
  Plant p = arm_analog();
  auto r = check_uniform_pd(theorem_pairs(p, scaled_ctrl(0.5, 1.0, 4.0)), p.domain, 300);
  EXPECT_TRUE(r.verdict);
  EXPECT_EQ(r.pairs_checked.size(), 6u);
}

TEST(Lyapunov, Values) {
  Mat I = Mat::Identity(2, 2);
  EXPECT_EQ(lyapunov_value(Vec::Zero(2), I, I), 0.0);
  EXPECT_DOUBLE_EQ(lyapunov_value(vec2(1, 0), I, I), 2.0);
  Rng rng(3);
  Mat A = rng.normal_mat(2, 2), Ah = rng.normal_mat(2, 2);
  Vec e = rng.normal_vec(2);
  EXPECT_NEAR(lyapunov_value(3.0 * e, A, Ah), 9.0 * lyapunov_value(e, A, Ah), 1e-12);
}

// The integrator has to carry B v + b, so exact models only drive the
// error to zero when the field settles on a fixed point.
TEST(Track, ExactModelsTrackPerfectly) {
  Plant p = arm_analog();
  for (double g : {1.0, 8.0}) {
    SdsController c(AffineIdModel::exact(p), AffineIdModel::exact(p), g, 2);
    TrackOptions opt;
    opt.T = 60;
    opt.dt = 5e-3;
    opt.record_every = 100;
    auto rec = track_speed_field(p, c, linear_field(-Mat::Identity(2, 2)), kX0, opt);
    EXPECT_LT(rec.asymptotic_error, 1e-6) << "gain " << g;
  }
}

TEST(Track, ExactModelsOnCycleLagShrinksWithGain) {
  Plant p = arm_analog();
  TrackOptions opt;
  opt.T = 60;
  opt.dt = 5e-3;
  opt.record_every = 100;
  SdsController c1(AffineIdModel::exact(p), AffineIdModel::exact(p), 1.0, 2);
  SdsController c8(AffineIdModel::exact(p), AffineIdModel::exact(p), 8.0, 2);
  double e1 = track_speed_field(p, c1, hopf_field(), kX0, opt).asymptotic_error;
  double e8 = track_speed_field(p, c8, hopf_field(), kX0, opt).asymptotic_error;
  EXPECT_LT(e8, 0.25 * e1);
}

TEST(Track, ErrorHalvesPerGainDoubling) {
  Plant p = arm_analog();
  TrackOptions opt;
  opt.T = 60;
  opt.dt = 5e-3;
  opt.record_every = 1000;
  double prev = 0;
  for (double g : {1.0, 2.0, 4.0, 8.0}) {
    double e = track_speed_field(p, scaled_ctrl(0.5, 1.0, g), hopf_field(), kX0, opt).asymptotic_error;
    if (prev > 0) {
      EXPECT_GE(e / prev, 0.3);
      EXPECT_LE(e / prev, 0.7);
    }
    prev = e;
  }
}

TEST(Track, SignImproperDiverges) {
  Plant p = arm_analog();
  SdsController c(AffineIdModel::scaled_plant(p, -1.0), AffineIdModel::scaled_plant(p, -0.5), 4.0, 2);
  TrackOptions opt;
  opt.T = 10;
  opt.dt = 5e-3;
  EXPECT_THROW(track_speed_field(p, c, hopf_field(), kX0, opt), ControllerDiverged);
}

TEST(Track, CsvColumns) {
  Plant p = arm_analog();
  TrackOptions opt;
  opt.T = 0.1;
  opt.dt = 0.01;
  auto rec = track_speed_field(p, scaled_ctrl(0.5, 1.0, 1.0), hopf_field(), kX0, opt);
  auto t = rec.to_csv();
  EXPECT_EQ(t.header().front(), "t");
  EXPECT_EQ(t.header().back(), "L");
  EXPECT_EQ(t.rows(), 11u);
}

TEST(TimeVarying, SwapStaysWithinFiveTimesSingleBound) {
  Plant p = arm_analog();
  TrackOptions opt;
  opt.T = 30;
  opt.dt = 5e-3;
  opt.record_every = 1;
  double single = track_speed_field(p, scaled_ctrl(0.7, 0.7, 4.0), hopf_field(), kX0, opt).asymptotic_error;
  ScheduleEntry lo{0.0, AffineIdModel::constant(0.7 * Mat::Identity(2, 2)),
                   AffineIdModel::constant(0.7 * Mat::Identity(2, 2)), 4.0};
  ScheduleEntry hi{0.0, AffineIdModel::constant(1.3 * Mat::Identity(2, 2)),
                   AffineIdModel::constant(1.3 * Mat::Identity(2, 2)), 4.0};
  auto rec = time_varying_track(p, scaled_ctrl(0.7, 0.7, 4.0), alternating_schedule({lo, hi}, 0.5, opt.T),
                                hopf_field(), kX0, opt);
  double worst = 0;
  for (std::size_t k = 0; k < rec.t.size(); ++k)
    if (rec.t[k] > 15.0) worst = std::max(worst, rec.e_norm[k]);
  EXPECT_LE(worst, 5 * single);
}

TEST(TimeVarying, SingleEntryScheduleIsBitwiseIdentical) {
  Plant p = arm_analog();
  auto c = scaled_ctrl(0.5, 1.0, 2.0);
  TrackOptions opt;
  opt.T = 2;
  opt.dt = 1e-2;
  auto a = track_speed_field(p, c, hopf_field(), kX0, opt);
  ScheduleEntry e{0.0, c.phi_hat, c.psi_hat, c.gain};
  auto b = time_varying_track(p, c, {e}, hopf_field(), kX0, opt);
  EXPECT_EQ(a.to_csv().to_string(), b.to_csv().to_string());
}

TEST(TimeVarying, ThroughImproperModelDiverges) {
  Plant p = arm_analog();
  ScheduleEntry good{0.0, AffineIdModel::constant(Mat::Identity(2, 2)),
                     AffineIdModel::constant(0.5 * Mat::Identity(2, 2)), 4.0};
  ScheduleEntry bad{3.0, AffineIdModel::scaled_plant(p, -1.0), AffineIdModel::scaled_plant(p, -0.5), 4.0};
  TrackOptions opt;
  opt.T = 10;
  opt.dt = 5e-3;
  try {
    time_varying_track(p, scaled_ctrl(0.5, 1.0, 4.0), {good, bad}, hopf_field(), kX0, opt);
    FAIL() << "expected divergence";
  } catch (const TrackingDiverged& e) {
    EXPECT_GE(e.time, 3.0);
  }
}

TEST(TimeVarying, RejectsUnsortedSchedule) {
  Plant p = arm_analog();
  ScheduleEntry a{0.0, AffineIdModel::constant(Mat::Identity(2, 2)), AffineIdModel::constant(Mat::Identity(2, 2)), 1};
  ScheduleEntry b = a, c = a;
  b.t_start = 2.0;
  c.t_start = 1.0;
  TrackOptions opt;
  EXPECT_THROW(time_varying_track(p, scaled_ctrl(1, 1, 1), {a, b, c}, hopf_field(), kX0, opt), InvalidConfig);
}

TEST(Noise, CommonRandomNumbersAreDeterministic) {
  Plant p = arm_analog();
  TrackOptions opt;
  opt.T = 1;
  opt.dt = 2e-3;
  opt.noise_before_std = 1.0;
  opt.noise_seed = 99;
  auto a = track_speed_field(p, scaled_ctrl(0.5, 0.5, 2.0), hopf_field(), kX0, opt);
  auto b = track_speed_field(p, scaled_ctrl(0.5, 0.5, 2.0), hopf_field(), kX0, opt);
  EXPECT_EQ(a.final_x, b.final_x);
  opt.noise_seed = 100;
  auto c = track_speed_field(p, scaled_ctrl(0.5, 0.5, 2.0), hopf_field(), kX0, opt);
  EXPECT_NE(a.final_x, c.final_x);
}

TEST(Noise, BeforeIntegratorPerturbationGrowsWithGain) {
  Plant p = arm_analog();
  TrackOptions base;
  base.T = 5;
  base.dt = 2e-3;
  base.record_every = 100000;
  std::vector<double> rms;
  for (double g : {1.0, 4.0}) {
    auto c = scaled_ctrl(0.5, 0.5, g);
    Vec clean = track_speed_field(p, c, hopf_field(), kX0, base).final_x;
    double acc = 0;
    for (int s = 0; s < 6; ++s) {
      TrackOptions o = base;
      o.noise_before_std = 1.0;
      o.noise_seed = 1000 + s;
      acc += (track_speed_field(p, c, hopf_field(), kX0, o).final_x - clean).squaredNorm();
    }
    rms.push_back(std::sqrt(acc / 6));
  }
  EXPECT_GT(rms[1], rms[0]);
}
