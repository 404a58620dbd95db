#pragma once

#include <cmath>

#include <Eigen/Dense>

#include "fesarm/default_models.hpp"

namespace fesarm::testing {

// Model with no muscles, no damping and limits far away: pure rigid-body chain.
inline ArmModel bare(Variant v) {
  ArmModel m = default_model(v);
  m.muscles.clear();
  for (Dof& d : m.dofs) {
    d.damping = 0.0;
    d.limit.lower = -100.0;
    d.limit.upper = 100.0;
  }
  return m;
}

// Textbook planar two-link arm (links rotate about parallel vertical axes).
inline Eigen::Vector2d closed_form_two_link(const ArmModel& m, const Eigen::Vector2d& q, const Eigen::Vector2d& qd,
                                            const Eigen::Vector2d& tau) {
  const double l1 = m.upper_arm.length;
  const double m1 = m.upper_arm.mass, c1 = m.upper_arm.com_offset, i1 = m.upper_arm.inertia_about_com();
  const double m2 = m.forearm.mass, c2 = m.forearm.com_offset, i2 = m.forearm.inertia_about_com();
  const double cos2 = std::cos(q[1]), sin2 = std::sin(q[1]);
  Eigen::Matrix2d mm;
  mm(0, 0) = i1 + m1 * c1 * c1 + i2 + m2 * (l1 * l1 + c2 * c2 + 2 * l1 * c2 * cos2);
  mm(0, 1) = mm(1, 0) = i2 + m2 * (c2 * c2 + l1 * c2 * cos2);
  mm(1, 1) = i2 + m2 * c2 * c2;
  const double h = m2 * l1 * c2 * sin2;
  const Eigen::Vector2d bias(-h * (2 * qd[0] * qd[1] + qd[1] * qd[1]), h * qd[0] * qd[0]);
  return mm.ldlt().solve(tau - bias);
}

}  // namespace fesarm::testing
