#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "fesarm/default_models.hpp"
#include "fesarm/dynamics.hpp"
#include "fesarm/simulator.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace fesarm;
using fesarm::testing::bare;
using fesarm::testing::closed_form_two_link;
using fesarm::testing::random_posture;

TEST(Dynamics, PlanarMatchesClosedFormTwoLinkOracle) {
  const ArmModel m = bare(Variant::Planar);
  Pcg32 rng(100);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const Eigen::Vector2d q(rng.uniform(-3, 3), rng.uniform(-3, 3));
    const Eigen::Vector2d qd(rng.uniform(-6, 6), rng.uniform(-6, 6));
    const Eigen::Vector2d tau(rng.uniform(-10, 10), rng.uniform(-10, 10));
    const DofVector got = solve_accelerations(m, body_frames(m, to_array(DofVector(q))), DofVector(qd), DofVector(tau));
    worst = std::max(worst, (Eigen::Vector2d(got) - closed_form_two_link(m, q, qd, tau)).cwiseAbs().maxCoeff());
  }
  EXPECT_LT(worst, 1e-8);
}

TEST(Dynamics, NewtonsLawForElbowWithShoulderHeld) {
  ArmModel m = bare(Variant::Planar);
  m.forearm.inertia = 0.5;
  const DofVector q = (DofVector(2) << 0.4, 1.1).finished();
  const DofMatrix mm = mass_matrix(m, q);
  EXPECT_NEAR(mm(1, 1), 0.5, 1e-12);
  // Shoulder reaction torque supplied so that only the elbow accelerates.
  const DofVector tau = (DofVector(2) << 2 * mm(0, 1), 1.0).finished();
  const DofVector qdd = solve_accelerations(m, body_frames(m, to_array(q)), DofVector::Zero(2), tau);
  EXPECT_NEAR(qdd[1], 2.0, 1e-12);
  EXPECT_NEAR(qdd[0], 0.0, 1e-12);
}

class MassMatrix : public ::testing::TestWithParam<Variant> {};

TEST_P(MassMatrix, SymmetricPositiveDefinite) {
  const ArmModel m = default_model(GetParam());
  Pcg32 rng(12);
  for (int k = 0; k < 200; ++k) {
    const DofMatrix mm = mass_matrix(m, random_posture(m, rng));
    EXPECT_LT((mm - mm.transpose()).cwiseAbs().maxCoeff(), 1e-10);
    Eigen::SelfAdjointEigenSolver<DofMatrix> es(mm);
    EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
  }
}

TEST_P(MassMatrix, VelocityProductPowerMatchesMassMatrixRate) {
  // Energy balance of the velocity-product terms: qd . c(q, qd) = 0.5 qd^T dM/dt qd,
  // with dM/dt taken by central differences along qd.
  const ArmModel m = default_model(GetParam());
  Pcg32 rng(13);
  for (int k = 0; k < 100; ++k) {
    const DofVector q = random_posture(m, rng);
    DofVector qd(m.dof_count());
    for (int d = 0; d < qd.size(); ++d) qd[d] = rng.uniform(-3, 3);
    const DofVector c = inverse_dynamics(m, body_frames(m, to_array(q)), qd, DofVector::Zero(m.dof_count()), false);
    const double h = 1e-6;
    const DofMatrix mdot = (mass_matrix(m, DofVector(q + h * qd)) - mass_matrix(m, DofVector(q - h * qd))) / (2 * h);
    EXPECT_NEAR(qd.dot(c), 0.5 * qd.dot(mdot * qd), 1e-6 * std::max(1.0, std::abs(qd.dot(c))));
    EXPECT_GT(kinetic_energy(m, {q, qd}), 0.0);
  }
}

INSTANTIATE_TEST_SUITE_P(Variants, MassMatrix, ::testing::Values(Variant::Planar, Variant::ThreeD),
                         [](const auto& info) { return info.param == Variant::Planar ? std::string("Planar") : std::string("ThreeD"); });

TEST(Dynamics, PlanarRestWithoutForcesStaysAtRest) {
  ArmModel m = default_model(Variant::Planar);
  for (Dof& d : m.dofs) d.damping = 0.0;
  const std::vector<double> forces(m.muscle_count(), 0.0);
  const DofVector qdd = forward_dynamics(m, {mid_range_posture(m), DofVector::Zero(2)}, forces);
  EXPECT_EQ(qdd.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Dynamics, ForwardDynamicsRejectsNegativeForces) {
  const ArmModel m = default_model(Variant::Planar);
  std::vector<double> forces(m.muscle_count(), 0.0);
  forces[0] = -1.0;
  EXPECT_THROW(forward_dynamics(m, {mid_range_posture(m), DofVector::Zero(2)}, forces), InvalidInput);
}

TEST(Dynamics, ThreeDGravityPullsArmDown) {
  ArmModel m = bare(Variant::ThreeD);
  m.gravity_on = true;
  const DofVector q = (DofVector(3) << 0.0, deg(90), deg(10)).finished();
  const DofVector qdd = solve_accelerations(m, body_frames(m, to_array(q)), DofVector::Zero(3), DofVector::Zero(3));
  EXPECT_LT(qdd[1], 0.0);  // elevation falls
  EXPECT_NEAR(qdd[0], 0.0, 1e-9);
  // Static holding torque equals m g times the horizontal lever of each mass.
  const DofVector g = bias_torques(m, body_frames(m, to_array((DofVector(3) << 0.0, deg(90), 0.0).finished())), DofVector::Zero(3));
  const double lever = m.upper_arm.mass * m.upper_arm.com_offset + m.forearm.mass * (m.upper_arm.length + m.forearm.com_offset);
  EXPECT_NEAR(g[1], m.gravity * lever, 1e-9);
}

TEST(PassiveTorque, SpecExamples) {
  ArmModel m = default_model(Variant::Planar);
  const DofVector mid = mid_range_posture(m);
  EXPECT_EQ(joint_passive_torque(m, {mid, DofVector::Zero(2)}).cwiseAbs().maxCoeff(), 0.0);
  m.dofs[0].damping = 0.5;
  const DofVector tau = joint_passive_torque(m, {mid, (DofVector(2) << 2.0, 0.0).finished()});
  EXPECT_DOUBLE_EQ(tau[0], -1.0);
  DofVector beyond = mid;
  beyond[1] = m.dofs[1].limit.upper + 0.05;
  EXPECT_LT(joint_passive_torque(m, {beyond, DofVector::Zero(2)})[1], 0.0);
  beyond[1] = m.dofs[1].limit.lower - 0.05;
  EXPECT_GT(joint_passive_torque(m, {beyond, DofVector::Zero(2)})[1], 0.0);
}

TEST(PassiveTorque, LimitSpringIsContinuousAtTheBound) {
  const ArmModel m = default_model(Variant::Planar);
  DofVector q = mid_range_posture(m);
  q[1] = m.dofs[1].limit.upper + 1e-9;
  EXPECT_LT(std::abs(joint_passive_torque(m, {q, DofVector::Zero(2)})[1]), 1e-6);
}

TEST(Energy, UndampedPassivePlanarConservesKineticEnergy) {
  const ArmModel m = bare(Variant::Planar);
  Simulator sim(m);
  SimState s = SimState::rest(m, (DofVector(2) << 0.3, 1.2).finished());
  s.q.theta_dot << 0.75, -1.0;
  const double e0 = kinetic_energy(m, s.q);
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    s = sim.step(std::move(s), {}, 0.1);
    worst = std::max(worst, std::abs(kinetic_energy(m, s.q) - e0) / e0);
  }
  EXPECT_LT(worst, 1e-3);
}

TEST(Energy, DampedArmLosesKineticEnergyMonotonically) {
  ArmModel m = bare(Variant::Planar);
  for (Dof& d : m.dofs) d.damping = 0.3;
  Simulator sim(m);
  SimState s = SimState::rest(m, (DofVector(2) << 0.3, 1.2).finished());
  s.q.theta_dot << 1.0, -1.0;
  double prev = kinetic_energy(m, s.q);
  for (int k = 0; k < 20; ++k) {
    s = sim.step(std::move(s), {}, 0.1);
    const double e = kinetic_energy(m, s.q);
    EXPECT_LE(e, prev);
    prev = e;
  }
}

TEST(PassiveTorque, LimitDampingOnlyResistsPenetration) {
  const ArmModel m = default_model(Variant::Planar);
  const JointLimit& lim = m.dofs[1].limit;
  DofVector q = mid_range_posture(m);
  q[1] = lim.upper + 0.05;
  const DofVector in = (DofVector(2) << 0.0, 2.0).finished();
  const DofVector out = (DofVector(2) << 0.0, -2.0).finished();
  EXPECT_NEAR(joint_damping(m, {q, in})[1], m.dofs[1].damping + lim.damping * std::exp(1.0), 1e-12);
  EXPECT_EQ(joint_damping(m, {q, out})[1], m.dofs[1].damping);
  // The coefficients reproduce the viscous part of the passive torque.
  const DofVector spring = joint_passive_torque(m, {q, DofVector::Zero(2)});
  EXPECT_NEAR(joint_passive_torque(m, {q, in})[1], spring[1] - joint_damping(m, {q, in})[1] * 2.0, 1e-9);
}
