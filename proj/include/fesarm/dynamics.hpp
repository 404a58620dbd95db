#pragma once

#include <array>
#include <cmath>
#include <span>

#include <Eigen/Dense>

#include "fesarm/arm_model.hpp"
#include "fesarm/kinematics.hpp"

namespace fesarm {

namespace detail {

inline Eigen::Vector3d eig(const Vec3d& v) { return {v.x, v.y, v.z}; }
inline Eigen::Matrix3d eig(const Mat3<double>& r) {
  Eigen::Matrix3d e;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) e(i, j) = r(i, j);
  return e;
}

struct BodyInertia {
  double mass = 0.0;
  Eigen::Vector3d com = Eigen::Vector3d::Zero();      // body frame
  Eigen::Matrix3d inertia = Eigen::Matrix3d::Zero();  // about the COM, body frame
};

inline BodyInertia segment_inertia(const Segment& s, const Vec3d& long_axis) {
  const Eigen::Vector3d u = eig(long_axis);
  BodyInertia b;
  b.mass = s.mass;
  b.com = s.com_offset * u;
  const Eigen::Matrix3d uu = u * u.transpose();
  b.inertia = s.inertia_about_com() * (Eigen::Matrix3d::Identity() - uu) + s.axial_inertia * uu;
  return b;
}

}  // namespace detail

/// Recursive Newton-Euler inverse dynamics over the serial chain, world frame.
/// Returns the joint torques needed to realise `qdd` at (q, qd).
inline DofVector inverse_dynamics(const ArmModel& m, const BodyFrames<double>& f, const DofVector& qd,
                                  const DofVector& qdd, bool with_gravity) {
  const int n = m.dof_count();
  constexpr int kB = kMaxDofs + 1;
  std::array<Eigen::Vector3d, kB> omega, omega_dot, acc, axis, pos, force, moment, com;
  std::array<detail::BodyInertia, kB> inertia;

  omega[0].setZero();
  omega_dot[0].setZero();
  acc[0].setZero();
  if (with_gravity && m.gravity_on) acc[0] = Eigen::Vector3d(0, 0, m.gravity);  // base acceleration trick
  pos[0].setZero();

  for (int k = 0; k < n; ++k) {
    const int b = k + 1;
    pos[b] = detail::eig(f.pos[b]);
    axis[k] = detail::eig(f.rot[k] * m.dofs[k].axis);
    const Eigen::Vector3d r = pos[b] - pos[k];
    const Eigen::Vector3d spin = axis[k] * qd[k];
    omega[b] = omega[k] + spin;
    omega_dot[b] = omega_dot[k] + axis[k] * qdd[k] + omega[k].cross(spin);
    acc[b] = acc[k] + omega_dot[k].cross(r) + omega[k].cross(omega[k].cross(r));

    force[b].setZero();
    moment[b].setZero();
    com[b].setZero();
    if (const Segment* s = m.segment_of_body(b)) {
      inertia[b] = detail::segment_inertia(*s, m.long_axis);
      const Eigen::Matrix3d rot = detail::eig(f.rot[b]);
      com[b] = rot * inertia[b].com;
      const Eigen::Matrix3d iw = rot * inertia[b].inertia * rot.transpose();
      const Eigen::Vector3d acc_com = acc[b] + omega_dot[b].cross(com[b]) + omega[b].cross(omega[b].cross(com[b]));
      force[b] = inertia[b].mass * acc_com;
      moment[b] = iw * omega_dot[b] + omega[b].cross(iw * omega[b]) + com[b].cross(force[b]);
    }
  }

  DofVector tau(n);
  Eigen::Vector3d f_child = Eigen::Vector3d::Zero();
  Eigen::Vector3d n_child = Eigen::Vector3d::Zero();
  Eigen::Vector3d r_child = Eigen::Vector3d::Zero();
  for (int b = n; b >= 1; --b) {
    const Eigen::Vector3d fb = force[b] + f_child;
    const Eigen::Vector3d nb = moment[b] + n_child + r_child.cross(f_child);
    tau[b - 1] = axis[b - 1].dot(nb);
    r_child = pos[b] - pos[b - 1];
    f_child = fb;
    n_child = nb;
  }
  return tau;
}

/// Joint-space mass matrix, one unit-acceleration inverse-dynamics pass per column.
inline DofMatrix mass_matrix(const ArmModel& m, const BodyFrames<double>& f) {
  const int n = m.dof_count();
  DofMatrix mm(n, n);
  const DofVector zero = DofVector::Zero(n);
  for (int j = 0; j < n; ++j) mm.col(j) = inverse_dynamics(m, f, zero, DofVector::Unit(n, j), false);
  return mm;
}

inline DofMatrix mass_matrix(const ArmModel& m, const DofVector& theta) {
  return mass_matrix(m, body_frames(m, to_array(theta)));
}

/// Velocity-product plus gravity torques (zero-acceleration pass).
inline DofVector bias_torques(const ArmModel& m, const BodyFrames<double>& f, const DofVector& qd) {
  return inverse_dynamics(m, f, qd, DofVector::Zero(m.dof_count()), true);
}

/// Damping plus smooth one-sided joint-limit torques. Past a limit by x the
/// spring gives k x e^(x/s); damping against further penetration grows with
/// the same factor e^(x/s), so it vanishes at contact onset and stops fast
/// impacts within a few degrees.
inline DofVector joint_passive_torque(const ArmModel& m, const JointState& q) {
  const int n = m.dof_count();
  DofVector tau(n);
  for (int d = 0; d < n; ++d) {
    const Dof& dof = m.dofs[d];
    const JointLimit& lim = dof.limit;
    const double th = q.theta[d];
    const double w = q.theta_dot[d];
    double t = -dof.damping * w;
    if (th > lim.upper) {
      const double x = th - lim.upper;
      const double g = std::exp(x / lim.scale);
      t -= lim.stiffness * x * g;
      if (w > 0) t -= lim.damping * g * w;
    } else if (th < lim.lower) {
      const double x = lim.lower - th;
      const double g = std::exp(x / lim.scale);
      t += lim.stiffness * x * g;
      if (w < 0) t -= lim.damping * g * w;
    }
    tau[d] = t;
  }
  return tau;
}

/// Diagonal viscous coefficients of joint_passive_torque at this state
/// (joint damping plus any active limit damping) [N m s / rad].
inline DofVector joint_damping(const ArmModel& m, const JointState& q) {
  const int n = m.dof_count();
  DofVector c(n);
  for (int d = 0; d < n; ++d) {
    const Dof& dof = m.dofs[d];
    const JointLimit& lim = dof.limit;
    const double th = q.theta[d];
    const double w = q.theta_dot[d];
    c[d] = dof.damping;
    if (th > lim.upper && w > 0) c[d] += lim.damping * std::exp((th - lim.upper) / lim.scale);
    if (th < lim.lower && w < 0) c[d] += lim.damping * std::exp((lim.lower - th) / lim.scale);
  }
  return c;
}

/// tau_muscle[d] = sum_m moment_arm(m, d) * F_m.
inline DofVector muscle_torques(const ArmModel& m, const MuscleGeometry& g, std::span<const double> forces) {
  DofVector tau = DofVector::Zero(m.dof_count());
  for (int i = 0; i < m.muscle_count(); ++i)
    for (int d = 0; d < m.dof_count(); ++d) tau[d] -= g.dlength[i][d] * forces[i];
  return tau;
}

/// Solves M(theta) qdd = tau_applied - bias(theta, theta_dot). When
/// `implicit_damping` (h times the viscous coefficients) is given, solves
/// (M + h D) qdd = ... instead, which makes the viscous terms of a
/// semi-implicit Euler step implicit in the new velocity.
inline DofVector solve_accelerations(const ArmModel& m, const BodyFrames<double>& f, const DofVector& qd,
                                     const DofVector& tau_applied, const DofVector* implicit_damping = nullptr) {
  DofMatrix mm = mass_matrix(m, f);
  if (implicit_damping) mm.diagonal() += *implicit_damping;
  const DofVector rhs = tau_applied - bias_torques(m, f, qd);
  Eigen::LLT<DofMatrix> llt(mm);
  if (llt.info() != Eigen::Success) throw NumericalError("mass matrix is not positive definite");
  return llt.solve(rhs);
}

/// Joint accelerations produced by the given muscle forces plus passive joint
/// torques, gravity and velocity-product terms.
inline DofVector forward_dynamics(const ArmModel& m, const JointState& q, std::span<const double> muscle_forces) {
  if (static_cast<int>(muscle_forces.size()) != m.muscle_count())
    throw InvalidInput("forward_dynamics: one force per muscle required");
  for (double v : muscle_forces)
    if (!std::isfinite(v) || v < 0) throw InvalidInput("forward_dynamics: muscle forces must be finite and non-negative");
  const MuscleGeometry g = muscle_geometry(m, q.theta);
  const DofVector tau = muscle_torques(m, g, muscle_forces) + joint_passive_torque(m, q);
  return solve_accelerations(m, body_frames(m, to_array(q.theta)), q.theta_dot, tau);
}

/// Kinetic energy 0.5 qd^T M qd.
inline double kinetic_energy(const ArmModel& m, const JointState& q) {
  const DofMatrix mm = mass_matrix(m, q.theta);
  return 0.5 * q.theta_dot.dot(mm * q.theta_dot);
}

}  // namespace fesarm
