#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "fesarm/calibration.hpp"
#include "fesarm/env.hpp"
#include "fesarm/simulator.hpp"
#include "test_support.hpp"

using namespace fesarm;
using fesarm::testing::calibrated;
using fesarm::testing::slack_posture;

TEST(Simulator, ZeroExcitationAtEquilibriumLeavesStateUnchanged) {
  const ArmModel& m = calibrated(Variant::Planar);
  Simulator sim(m);
  const DofVector q = slack_posture(m);
  const SimState s0 = SimState::rest(m, q);
  const SimState s1 = sim.step(s0, std::vector<double>(m.muscle_count(), 0.0), 0.1);
  EXPECT_LT((s1.q.theta - q).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT(s1.q.theta_dot.cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_NEAR(s1.time, 0.1, 1e-12);
}

TEST(Simulator, FullElbowFlexorExcitationFlexesElbow) {
  for (Variant v : {Variant::Planar, Variant::ThreeD}) {
    const ArmModel& m = calibrated(v);
    Simulator sim(m, {1e-3, 1});
    std::vector<double> u(m.muscle_count(), 0.0);
    u[m.muscle_index("biceps_short")] = 1.0;
    u[m.muscle_index("brachialis")] = 1.0;
    std::vector<TelemetrySample> tel;
    const DofVector q = mid_range_posture(m);
    const SimState s = sim.step(SimState::rest(m, q), u, 0.1, &tel);
    const int elbow = m.dof_count() - 1;
    EXPECT_GT(s.q.theta[elbow], q[elbow]);
    ASSERT_EQ(tel.size(), 100u);
    // Once the flexors have built force the elbow keeps flexing.
    for (std::size_t k = 51; k < tel.size(); ++k) EXPECT_GT(tel[k].theta[elbow], tel[k - 1].theta[elbow]) << k;
  }
}

TEST(Simulator, RepeatedCallsAreBitIdentical) {
  const ArmModel& m = calibrated(Variant::ThreeD);
  Simulator a(m), b(m);
  Pcg32 rng(7);
  SimState sa = SimState::rest(m, mid_range_posture(m)), sb = sa;
  for (int k = 0; k < 20; ++k) {
    std::vector<double> u(m.muscle_count());
    for (double& x : u) x = rng.uniform();
    sa = a.step(std::move(sa), u, 0.1);
    sb = b.step(std::move(sb), u, 0.1);
    for (int d = 0; d < m.dof_count(); ++d) {
      EXPECT_EQ(sa.q.theta[d], sb.q.theta[d]);
      EXPECT_EQ(sa.q.theta_dot[d], sb.q.theta_dot[d]);
    }
  }
}

TEST(Simulator, TelemetryIsDecimated) {
  const ArmModel& m = calibrated(Variant::Planar);
  Simulator sim(m, {1e-3, 10});
  std::vector<TelemetrySample> tel;
  sim.step(SimState::rest(m, mid_range_posture(m)), std::vector<double>(m.muscle_count(), 0.2), 0.1, &tel);
  ASSERT_EQ(tel.size(), 10u);
  EXPECT_NEAR(tel.back().time, 0.1, 1e-12);
  EXPECT_EQ(tel.front().activation.size(), static_cast<std::size_t>(m.muscle_count()));
  EXPECT_EQ(tel.front().force.size(), static_cast<std::size_t>(m.muscle_count()));
}

TEST(Simulator, NonFiniteStateReportsDivergedSubstep) {
  const ArmModel& m = calibrated(Variant::Planar);
  Simulator sim(m);
  SimState s = SimState::rest(m, mid_range_posture(m));
  s.q.theta_dot << 1e200, 1e200;
  try {
    sim.step(s, std::vector<double>(m.muscle_count(), 0.0), 0.1);
    FAIL() << "expected divergence";
  } catch (const SimulationDiverged& e) {
    EXPECT_EQ(e.substep(), 0);
  }
}

TEST(Simulator, RejectsWrongExcitationCount) {
  const ArmModel& m = calibrated(Variant::Planar);
  Simulator sim(m);
  EXPECT_THROW(sim.step(SimState::rest(m, mid_range_posture(m)), std::vector<double>(3, 0.0), 0.1), InvalidInput);
}

class JointLimits : public ::testing::TestWithParam<Variant> {};

TEST_P(JointLimits, HeldWithinFiveDegreesAtExcitationExtremes) {
  const ArmModel& m = calibrated(GetParam());
  const EnvConfig cfg = default_env_config(m);
  Simulator sim(m);
  double worst = 0.0;
  // Every channel alone at full intensity, all channels together, and none.
  std::vector<Action> patterns;
  for (int k = 0; k < cfg.action_dim(); ++k) patterns.push_back(Action::Unit(cfg.action_dim(), k));
  patterns.push_back(Action::Ones(cfg.action_dim()));
  patterns.push_back(Action::Zero(cfg.action_dim()));
  Pcg32 rng(21);
  for (const Action& a : patterns)
    for (int start = 0; start < 4; ++start) {
      DofVector q(m.dof_count());
      for (int d = 0; d < q.size(); ++d) q[d] = rng.uniform(cfg.init_ranges[d].lo, cfg.init_ranges[d].hi);
      SimState s = SimState::rest(m, q);
      const auto u = map_channels(cfg, a, m.muscle_count());
      std::vector<TelemetrySample> tel;
      for (int k = 0; k < 30; ++k) s = sim.step(std::move(s), u, 0.1, &tel);
      for (const auto& t : tel)
        for (int d = 0; d < m.dof_count(); ++d) {
          worst = std::max(worst, t.theta[d] - m.dofs[d].limit.upper);
          worst = std::max(worst, m.dofs[d].limit.lower - t.theta[d]);
        }
    }
  EXPECT_LT(worst, deg(5.0)) << "worst excursion " << to_deg(worst) << " deg";
}

INSTANTIATE_TEST_SUITE_P(Variants, JointLimits, ::testing::Values(Variant::Planar, Variant::ThreeD),
                         [](const auto& info) { return info.param == Variant::Planar ? std::string("Planar") : std::string("ThreeD"); });
