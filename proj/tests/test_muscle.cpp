#include <gtest/gtest.h>

#include <cmath>

#include "fesarm/muscle.hpp"
#include "fesarm/rng.hpp"

using namespace fesarm;

namespace {

MuscleParams unit_muscle() {
  MuscleParams p;
  p.name = "m";
  p.f_max = 1000.0;
  p.l_opt = 0.1;
  p.l_slack = 0.2;
  p.v_max = 10.0;
  return p;
}

}  // namespace

TEST(Activation, FixedPointWhenExcitationEqualsActivation) {
  for (double dt : {1e-4, 0.01, 0.1, 3.0})
    EXPECT_DOUBLE_EQ(activation_step({0.3}, 0.3, dt, unit_muscle()).activation, 0.3);
}

TEST(Activation, RiseMatchesAnalyticSolution) {
  EXPECT_NEAR(activation_step({0.0}, 1.0, 0.1, unit_muscle()).activation, 1.0 - std::exp(-1.0), 1e-15);
}

TEST(Activation, DecayUsesDeactivationConstant) {
  EXPECT_NEAR(activation_step({1.0}, 0.0, 0.06, unit_muscle()).activation, std::exp(-1.0), 1e-15);
}

TEST(Activation, SubstepsMatchClosedFormToMachinePrecision) {
  // 100 exact substeps of 1 ms reproduce u + (a0 - u) exp(-t / tau).
  const MuscleParams p = unit_muscle();
  MuscleState s{0.1};
  for (int k = 0; k < 100; ++k) s = activation_step(s, 0.9, 1e-3, p);
  EXPECT_NEAR(s.activation, 0.9 + (0.1 - 0.9) * std::exp(-0.1 / p.tau_act), 1e-14);
}

TEST(Activation, StaysInUnitIntervalForRandomInputs) {
  Pcg32 rng(11);
  const MuscleParams p = unit_muscle();
  for (int i = 0; i < 20000; ++i) {
    const double a = rng.uniform();
    const double u = rng.uniform();
    const double dt = rng.uniform(1e-6, 2.0);
    const double out = activation_step({a}, u, dt, p).activation;
    EXPECT_GE(out, 0.0);
    EXPECT_LE(out, 1.0);
  }
}

TEST(Activation, SemigroupPropertyOnOneSide) {
  Pcg32 rng(5);
  const MuscleParams p = unit_muscle();
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform();
    const double a = rng.uniform();
    const double dt1 = rng.uniform(0.0001, 0.3);
    const double dt2 = rng.uniform(0.0001, 0.3);
    const double two = activation_step(activation_step({a}, u, dt1, p), u, dt2, p).activation;
    const double one = activation_step({a}, u, dt1 + dt2, p).activation;
    EXPECT_NEAR(two, one, 1e-14);
  }
}

TEST(Activation, RejectsNonFiniteInput) {
  const MuscleParams p = unit_muscle();
  EXPECT_THROW(activation_step({0.1}, std::nan(""), 0.01, p), InvalidInput);
  EXPECT_THROW(activation_step({0.1}, 0.5, std::numeric_limits<double>::infinity(), p), InvalidInput);
  EXPECT_THROW(activation_step({0.1}, 0.5, 0.0, p), InvalidInput);
}

TEST(ForceLength, ActiveCurveValues) {
  EXPECT_DOUBLE_EQ(active_force_length(1.0), 1.0);
  EXPECT_NEAR(active_force_length(0.55), std::exp(-0.45), 1e-15);
  EXPECT_LT(active_force_length(2.5), 1e-2);
}

TEST(ForceLength, PassiveCurveValues) {
  EXPECT_EQ(passive_force_length(0.9), 0.0);
  EXPECT_EQ(passive_force_length(1.0), 0.0);
  EXPECT_NEAR(passive_force_length(1.6), 1.0, 1e-14);
  EXPECT_GT(passive_force_length(1.01), 0.0);
}

TEST(ForceVelocity, BranchValues) {
  EXPECT_EQ(force_velocity(0.0), 1.0);
  EXPECT_EQ(force_velocity(-1.0), 0.0);
  EXPECT_EQ(force_velocity(-3.0), 0.0);
  EXPECT_NEAR(force_velocity(-0.25), 0.375, 1e-15);
  EXPECT_NEAR(force_velocity(50.0), 1.4, 1e-9);
  for (double v = -1.0; v < 5.0; v += 0.01) {
    EXPECT_GE(force_velocity(v), 0.0);
    EXPECT_LE(force_velocity(v), 1.4);
  }
}

TEST(ForceCurves, ContinuousEverywhereSampled) {
  const double h = 1e-7;
  for (double x = 0.05; x < 1.8; x += 0.001) {
    EXPECT_LT(std::abs(active_force_length(x) - active_force_length(x + h)), 1e-6);
    EXPECT_LT(std::abs(passive_force_length(x) - passive_force_length(x + h)), 1e-5);
  }
  for (double v = -1.5; v < 3.0; v += 0.001) EXPECT_LT(std::abs(force_velocity(v) - force_velocity(v + h)), 1e-5);
}

TEST(MtuForce, IsometricAtOptimalLength) {
  const MuscleParams p = unit_muscle();
  const double l = p.l_slack + p.l_opt;
  EXPECT_DOUBLE_EQ(mtu_force(p, {1.0}, l, 0.0), p.f_max);
  EXPECT_NEAR(mtu_force(p, {0.0}, l, 0.0), 0.0, 1e-9 * p.f_max);
}

TEST(MtuForce, ConcentricHalfActivation) {
  const MuscleParams p = unit_muscle();
  const double v = -0.25 * p.l_opt * p.v_max;
  EXPECT_NEAR(mtu_force(p, {0.5}, p.l_slack + p.l_opt, v), 0.5 * 0.375 * p.f_max, 1e-9);
}

TEST(MtuForce, FiberLengthFloorBelowSlack) {
  const MuscleParams p = unit_muscle();
  EXPECT_DOUBLE_EQ(fiber_length(p, 0.05), 0.01 * p.l_opt);
  EXPECT_GE(mtu_force(p, {1.0}, 0.05, 0.0), 0.0);
}

TEST(MtuForce, MonotoneInActivationAndNonNegative) {
  Pcg32 rng(3);
  const MuscleParams p = unit_muscle();
  for (int i = 0; i < 5000; ++i) {
    const double l = rng.uniform(0.1, 0.45);
    const double v = rng.uniform(-2.0, 2.0);
    const double a1 = rng.uniform();
    const double a2 = rng.uniform();
    const double f1 = mtu_force(p, {std::min(a1, a2)}, l, v);
    const double f2 = mtu_force(p, {std::max(a1, a2)}, l, v);
    EXPECT_GE(f1, 0.0);
    EXPECT_LE(f1, f2);
  }
}

TEST(MtuForce, RejectsNonFiniteInputs) {
  const MuscleParams p = unit_muscle();
  EXPECT_THROW(mtu_force(p, {0.5}, std::nan(""), 0.0), InvalidInput);
  EXPECT_THROW(mtu_force(p, {0.5}, 0.3, std::numeric_limits<double>::infinity()), InvalidInput);
}

TEST(MuscleParams, ValidationRejectsBadValues) {
  MuscleParams p = unit_muscle();
  p.f_max = 0.0;
  EXPECT_THROW(validate(p), ModelConfigError);
  p = unit_muscle();
  p.l_slack = -0.01;
  EXPECT_THROW(validate(p), ModelConfigError);
  p = unit_muscle();
  p.tau_deact = 0.0;
  EXPECT_THROW(validate(p), ModelConfigError);
  EXPECT_NO_THROW(validate(unit_muscle()));
}
