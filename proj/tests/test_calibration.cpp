#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "fesarm/calibration.hpp"
#include "fesarm/default_models.hpp"
#include "fesarm/model_io.hpp"
#include "test_support.hpp"

using namespace fesarm;

namespace {

std::vector<double> slack_of(const ArmModel& m) {
  std::vector<double> s;
  for (const auto& p : m.muscles) s.push_back(p.muscle.l_slack);
  return s;
}

}  // namespace

TEST(Calibration, AlreadyBalancedModelIsLeftAlone) {
  // Slack long enough that no fibre is ever stretched past l_opt: J = 0 everywhere.
  ArmModel m = default_model(Variant::Planar);
  Pcg32 probe(1);
  const auto postures = sample_postures(joint_limit_ranges(m), 400, probe);
  for (int i = 0; i < m.muscle_count(); ++i) {
    double longest = 0.0;
    for (const DofVector& q : postures) longest = std::max(longest, mtu_length(m, q, i));
    m.muscles[i].muscle.l_slack = longest;  // fibre length never exceeds 0 + (L - longest) <= l_opt
  }
  Pcg32 rng(2);
  const CalibrationResult r = calibrate_tendon_slack(m, rng);
  EXPECT_EQ(r.objective_before, 0.0);
  EXPECT_LT(r.objective_after, 1e-12);
  EXPECT_TRUE(r.success);
  for (int i = 0; i < m.muscle_count(); ++i) EXPECT_NEAR(r.slack[i], r.initial_slack[i], 1e-3 * r.initial_slack[i]);
}

TEST(Calibration, RecoversSingleMuscleClosedFormSlack) {
  ArmModel m = default_model(Variant::Planar);
  const MusclePath brachialis = m.muscles[m.muscle_index("brachialis")];
  m.muscles = {brachialis};
  const DofVector rest = (DofVector(2) << deg(20), deg(60)).finished();
  const double exact = mtu_length(m, rest, 0) - brachialis.muscle.l_opt;  // fibre exactly at l_opt
  m.muscles[0].muscle.l_slack = 0.7 * exact;  // stretched start: large passive torque
  CalibrationOptions opt;
  opt.posture_ranges = std::vector<Range>{{rest[0], rest[0]}, {rest[1], rest[1]}};
  opt.postures = 10;
  Pcg32 rng(3);
  const CalibrationResult r = calibrate_tendon_slack(m, rng, opt);
  EXPECT_GT(r.objective_before, 1.0);
  EXPECT_NEAR(r.slack[0], exact, 1e-4);
}

TEST(Calibration, DefaultModelsReachSmallPassiveTorque) {
  for (Variant v : {Variant::Planar, Variant::ThreeD}) {
    const ArmModel m = default_model(v);
    Pcg32 rng = Pcg32::derive(0, streams::kCalibration);
    const CalibrationResult r = calibrate_tendon_slack(m, rng);
    EXPECT_TRUE(r.success) << to_string(v);
    EXPECT_LT(r.objective_after, r.objective_before);
    EXPECT_LE(r.evaluations, CalibrationOptions{}.budget);
    const ArmModel cal = apply_slack(m, r.slack);
    EXPECT_TRUE(cal.calibrated);
    Pcg32 held_out(99);
    const auto postures = sample_postures(joint_limit_ranges(m), 100, held_out);
    EXPECT_LT(max_passive_torque(cal, postures), 0.5) << to_string(v);
    EXPECT_GT(max_passive_torque(m, postures), 5.0) << to_string(v);  // the uncalibrated table is far off
  }
}

TEST(Calibration, ResultStaysInsideBox) {
  ArmModel m = default_model(Variant::ThreeD);
  CalibrationOptions opt;
  opt.lower_factor = 0.9;
  opt.upper_factor = 1.1;  // too tight to balance: the optimum presses on the box
  opt.budget = 1500;
  Pcg32 rng(4);
  const CalibrationResult r = calibrate_tendon_slack(m, rng, opt);
  for (int i = 0; i < m.muscle_count(); ++i) {
    EXPECT_GE(r.slack[i], 0.9 * r.initial_slack[i] * (1 - 1e-12));
    EXPECT_LE(r.slack[i], 1.1 * r.initial_slack[i] * (1 + 1e-12));
  }
  EXPECT_FALSE(r.success);
  EXPECT_EQ(r.residuals.size(), static_cast<std::size_t>(opt.postures));
}

TEST(Calibration, SameSeedGivesByteIdenticalConfig) {
  const auto run = [] {
    const ArmModel m = default_model(Variant::Planar);
    Pcg32 rng(5);
    return to_json(apply_slack(m, calibrate_tendon_slack(m, rng).slack)).dump(2);
  };
  EXPECT_EQ(run(), run());
}

TEST(Calibration, RejectsNonPositiveSlack) {
  ArmModel m = default_model(Variant::Planar);
  m.muscles[0].muscle.l_slack = 0.0;
  Pcg32 rng(6);
  EXPECT_THROW(calibrate_tendon_slack(m, rng), InvalidInput);
}

TEST(Calibration, PassiveTorqueMatchesMuscleModel) {
  const ArmModel& m = fesarm::testing::calibrated(Variant::Planar);
  const DofVector q = (DofVector(2) << deg(100), deg(140)).finished();
  const MuscleGeometry g = muscle_geometry(m, q);
  DofVector expected = DofVector::Zero(2);
  for (int i = 0; i < m.muscle_count(); ++i) {
    const double f = mtu_force(m.muscles[i].muscle, {0.0}, g.length[i], 0.0, m.curves);
    for (int d = 0; d < 2; ++d) expected[d] += g.moment_arm(i, d) * f;
  }
  EXPECT_LT((passive_muscle_torque(m, g, slack_of(m)) - expected).cwiseAbs().maxCoeff(), 1e-12);
}
