#pragma once

#include <numbers>
#include <string>
#include <vector>

#include "fesarm/arm_model.hpp"
#include "fesarm/kinematics.hpp"

namespace fesarm {

// Default model tables. Anthropometrics, muscle strengths and via-point
// placements are plausible defaults, not measured ground truth; they are
// tuned so that flexor/extensor moment arms keep their anatomical sign with
// magnitudes of roughly 1-4 cm over the range of motion.

inline double deg(double d) { return d * std::numbers::pi / 180.0; }

namespace defaults {

inline Segment rod(double length, double mass, double radius = 0.04) {
  Segment s;
  s.length = length;
  s.mass = mass;
  s.inertia = mass * length * length / 3.0;
  s.com_offset = length / 2.0;
  s.axial_inertia = 0.5 * mass * radius * radius;
  return s;
}

inline JointLimit limit(double lower_deg, double upper_deg) {
  JointLimit l;
  l.lower = deg(lower_deg);
  l.upper = deg(upper_deg);
  return l;
}

inline MuscleParams muscle(const std::string& name, double f_max, double l_opt) {
  MuscleParams p;
  p.name = name;
  p.f_max = f_max;
  p.l_opt = l_opt;
  return p;
}

// Elbow geometry is authored in "arm-plane" coordinates of the segment frame:
// x along the segment, y toward the flexor side, z along the elbow axis. The
// 3D model's segment frames use long axis -z, flexor side +x, elbow axis -y.
inline Vec3d arm_plane(Variant v, double along, double flexor_side, double axial = 0.0) {
  if (v == Variant::Planar) return {along, flexor_side, axial};
  return {flexor_side, -axial, -along};
}

inline constexpr double kElbowWrapRadius = 0.018;

// Muscles crossing the elbow, shared by both variants. Shoulder segments of
// the biarticular muscles are supplied by the caller.
struct ElbowPaths {
  std::vector<ViaPoint> biceps_distal, triceps_distal, brachialis, triceps_medial;
};

inline ElbowPaths elbow_paths(Variant v, int elbow_wrap) {
  const double l = 0.33;
  const auto ua = [&](double a, double b) { return ViaPoint{Body::UpperArm, arm_plane(v, a, b), std::nullopt}; };
  const auto fa = [&](double a, double b) { return ViaPoint{Body::Forearm, arm_plane(v, a, b), elbow_wrap}; };
  ElbowPaths p;
  p.biceps_distal = {ua(l - 0.11, 0.022), fa(0.045, 0.010)};
  p.triceps_distal = {ua(l - 0.09, -0.024), fa(-0.010, -0.020)};
  p.brachialis = {ua(l - 0.13, 0.015), fa(0.035, 0.008)};
  p.triceps_medial = {ua(l - 0.19, -0.020), ua(l - 0.08, -0.022), fa(-0.010, -0.020)};
  return p;
}

inline WrapSurface elbow_cylinder(Variant v) {
  WrapSurface w;
  w.name = "elbow";
  w.body = Body::UpperArm;
  w.center = arm_plane(v, 0.33, 0.0);
  w.axis = arm_plane(v, 0.0, 0.0, 1.0);
  w.radius = kElbowWrapRadius;
  w.active_side = -1;  // flexors pass on the flexor side; extensors override to +1
  return w;
}

}  // namespace defaults

/// Arm-Planar: horizontal-plane shoulder and elbow, 6 muscles, no gravity.
inline ArmModel default_planar_model() {
  using namespace defaults;
  const Variant v = Variant::Planar;
  ArmModel m;
  m.variant = v;
  m.upper_arm = rod(0.33, 2.0);
  m.forearm = rod(0.32, 1.5);
  m.long_axis = {1, 0, 0};
  m.gravity_on = false;

  Dof shoulder{"shoulder_flexion", {0, 0, 1}, {0, 0, 0}, 0.3, limit(-40, 120)};
  Dof elbow{"elbow_flexion", {0, 0, 1}, {0.33, 0, 0}, 0.3, limit(5, 150)};
  m.dofs = {shoulder, elbow};

  WrapSurface shoulder_front{"shoulder_front", WrapShape::Cylinder, Body::Torso, {0, 0, 0}, {0, 0, 1}, 0.020, -1};
  WrapSurface shoulder_back{"shoulder_back", WrapShape::Cylinder, Body::Torso, {0, 0, 0}, {0, 0, 1}, 0.020, +1};
  WrapSurface elbow_front = elbow_cylinder(v);
  WrapSurface elbow_back = elbow_front;
  elbow_back.name = "elbow_back";
  elbow_back.active_side = +1;
  m.wraps = {shoulder_front, shoulder_back, elbow_front, elbow_back};
  constexpr int kShoulderFront = 0, kShoulderBack = 1, kElbowFront = 2, kElbowBack = 3;

  const ElbowPaths e = elbow_paths(v, kElbowFront);
  const auto with_wrap = [](std::vector<ViaPoint> pts, int wrap) {
    pts.back().wrap = wrap;
    return pts;
  };

  MusclePath biceps{muscle("biceps_short", 800, 0.132),
                    {{Body::Torso, {-0.035, 0.026, 0}, std::nullopt}, {Body::UpperArm, {0.08, 0.022, 0}, kShoulderFront}},
                    {0, 1}};
  for (const ViaPoint& p : e.biceps_distal) biceps.points.push_back(p);
  biceps.points.back().wrap = kElbowFront;

  MusclePath triceps_long{muscle("triceps_long", 1000, 0.134),
                          {{Body::Torso, {-0.030, -0.026, 0}, std::nullopt}, {Body::UpperArm, {0.08, -0.022, 0}, kShoulderBack}},
                          {0, 1}};
  for (const ViaPoint& p : e.triceps_distal) triceps_long.points.push_back(p);
  triceps_long.points.back().wrap = kElbowBack;

  MusclePath brachialis{muscle("brachialis", 800, 0.086), with_wrap(e.brachialis, kElbowFront), {1}};
  MusclePath triceps_medial{muscle("triceps_medial", 600, 0.114), with_wrap(e.triceps_medial, kElbowBack), {1}};

  MusclePath pect{muscle("pect_major_c", 350, 0.10),
                  {{Body::Torso, {-0.10, 0.032, 0}, std::nullopt}, {Body::UpperArm, {0.05, 0.008, 0}, kShoulderFront}},
                  {0}};
  MusclePath delt_post{muscle("delt_post", 260, 0.10),
                       {{Body::Torso, {-0.03, -0.034, 0}, std::nullopt}, {Body::UpperArm, {0.10, -0.010, 0}, kShoulderBack}},
                       {0}};

  m.muscles = {triceps_medial, triceps_long, brachialis, biceps, pect, delt_post};
  return m;
}

/// Arm-3D: two-axis shoulder (azimuth then elevation, no axial twist) plus
/// elbow, 8 muscles, gravity on.
inline ArmModel default_3d_model() {
  using namespace defaults;
  const Variant v = Variant::ThreeD;
  ArmModel m;
  m.variant = v;
  m.upper_arm = rod(0.33, 2.0);
  m.forearm = rod(0.32, 1.5);
  m.long_axis = {0, 0, -1};
  m.gravity_on = true;

  Dof azimuth{"shoulder_azimuth", {0, 0, 1}, {0, 0, 0}, 0.3, limit(-45, 130)};
  Dof elevation{"shoulder_elevation", {-1, 0, 0}, {0, 0, 0}, 0.3, limit(0, 130)};
  Dof elbow{"elbow_flexion", {0, -1, 0}, {0, 0, -0.33}, 0.3, limit(5, 150)};
  m.dofs = {azimuth, elevation, elbow};

  WrapSurface elbow_front = elbow_cylinder(v);
  WrapSurface elbow_back = elbow_front;
  elbow_back.name = "elbow_back";
  elbow_back.active_side = +1;
  // Humeral head, centred on the shoulder joint.
  WrapSurface head{"humeral_head", WrapShape::Sphere, Body::Torso, {0, 0, 0}, {0, 0, 1}, 0.025, 1};
  m.wraps = {elbow_front, elbow_back, head};
  constexpr int kElbowFront = 0, kElbowBack = 1, kHead = 2;

  const ElbowPaths e = elbow_paths(v, kElbowFront);
  const auto with_wrap = [](std::vector<ViaPoint> pts, int wrap) {
    pts.back().wrap = wrap;
    return pts;
  };

  MusclePath biceps{muscle("biceps_short", 800, 0.132),
                    {{Body::Torso, {0.035, 0.010, 0.0}, std::nullopt}, {Body::UpperArm, {0.025, 0.0, -0.08}, kHead}},
                    {0, 1, 2}};
  for (const ViaPoint& p : e.biceps_distal) biceps.points.push_back(p);
  biceps.points.back().wrap = kElbowFront;

  MusclePath triceps_long{muscle("triceps_long", 1000, 0.134),
                          {{Body::Torso, {-0.025, 0.0, -0.03}, std::nullopt}, {Body::UpperArm, {-0.028, 0.0, -0.08}, kHead}},
                          {0, 1, 2}};
  for (const ViaPoint& p : e.triceps_distal) triceps_long.points.push_back(p);
  triceps_long.points.back().wrap = kElbowBack;

  MusclePath brachialis{muscle("brachialis", 800, 0.086), with_wrap(e.brachialis, kElbowFront), {2}};
  MusclePath triceps_medial{muscle("triceps_medial", 600, 0.114), with_wrap(e.triceps_medial, kElbowBack), {2}};

  MusclePath pect{muscle("pect_major_c", 350, 0.10),
                  {{Body::Torso, {0.04, 0.12, 0.0}, std::nullopt}, {Body::UpperArm, {0.015, 0.0, -0.06}, kHead}},
                  {0, 1}};
  MusclePath delt_post{muscle("delt_post", 260, 0.12),
                       {{Body::Torso, {-0.05, -0.01, 0.02}, std::nullopt}, {Body::UpperArm, {-0.010, -0.010, -0.12}, kHead}},
                       {0, 1}};
  MusclePath delt_lat{muscle("delt_lat", 800, 0.085),
                      {{Body::Torso, {0.0, -0.015, 0.035}, std::nullopt}, {Body::UpperArm, {0.0, -0.014, -0.12}, kHead}},
                      {0, 1}};
  MusclePath delt_ant{muscle("delt_ant", 700, 0.06),
                      {{Body::Torso, {0.04, -0.005, 0.03}, std::nullopt}, {Body::UpperArm, {0.010, -0.010, -0.12}, kHead}},
                      {0, 1}};

  m.muscles = {triceps_medial, triceps_long, brachialis, biceps, pect, delt_post, delt_lat, delt_ant};
  return m;
}

/// Sets every tendon slack length so that the fibre sits at l_opt in the
/// given posture. Used to produce the uncalibrated starting table.
inline void set_slack_at_posture(ArmModel& m, const DofVector& theta) {
  for (int i = 0; i < m.muscle_count(); ++i) {
    MuscleParams& p = m.muscles[i].muscle;
    p.l_slack = std::max(mtu_length(m, theta, i) - p.l_opt, 0.0);
  }
}

inline DofVector mid_range_posture(const ArmModel& m) {
  DofVector q(m.dof_count());
  for (int d = 0; d < m.dof_count(); ++d) q[d] = 0.5 * (m.dofs[d].limit.lower + m.dofs[d].limit.upper);
  return q;
}

inline ArmModel default_model(Variant v) {
  ArmModel m = v == Variant::Planar ? default_planar_model() : default_3d_model();
  set_slack_at_posture(m, mid_range_posture(m));
  return m;
}

}  // namespace fesarm
