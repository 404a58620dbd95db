#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fesarm/errors.hpp"
#include "fesarm/geometry.hpp"
#include "fesarm/muscle.hpp"

namespace fesarm {

inline constexpr int kModelFormatVersion = 1;
inline constexpr int kMaxDofs = 3;

/// Per-DOF vector with inline storage (no heap allocation in the physics loop).
using DofVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDofs, 1>;
using DofMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDofs, kMaxDofs>;

enum class Variant { Planar, ThreeD };

inline std::string to_string(Variant v) { return v == Variant::Planar ? "planar" : "3d"; }
inline Variant variant_from_string(const std::string& s) {
  if (s == "planar") return Variant::Planar;
  if (s == "3d" || s == "threed") return Variant::ThreeD;
  throw InvalidInput("unknown model variant '" + s + "' (expected planar or 3d)");
}

enum class Body { Torso, UpperArm, Forearm };

inline std::string to_string(Body b) {
  switch (b) {
    case Body::Torso: return "torso";
    case Body::UpperArm: return "upperarm";
    case Body::Forearm: return "forearm";
  }
  return "?";
}
inline Body body_from_string(const std::string& s) {
  if (s == "torso") return Body::Torso;
  if (s == "upperarm") return Body::UpperArm;
  if (s == "forearm") return Body::Forearm;
  throw ModelConfigError("unknown body '" + s + "'");
}

/// Rigid segment. Mass is distributed along the segment's long axis.
struct Segment {
  double length = 0.3;         ///< [m]
  double mass = 1.0;           ///< [kg]
  double inertia = 0.03;       ///< transverse moment of inertia about the proximal joint [kg m^2]
  double com_offset = 0.15;    ///< distance of the centre of mass from the proximal joint [m]
  double axial_inertia = 1e-3; ///< moment of inertia about the long axis [kg m^2]

  double inertia_about_com() const { return inertia - mass * com_offset * com_offset; }
};

struct JointLimit {
  double lower = -1.0;      ///< [rad]
  double upper = 1.0;       ///< [rad]
  double stiffness = 50.0;  ///< [N m / rad]
  double scale = 0.05;      ///< exponential growth scale of the limit spring [rad]
  double damping = 20.0;    ///< damping against further penetration, scaled by e^(x/scale) [N m s / rad]
};

struct Dof {
  std::string name;
  Vec3d axis;          ///< rotation axis, expressed in the parent body frame
  Vec3d offset;        ///< joint origin in the parent body frame [m]
  double damping = 0.3;  ///< [N m s / rad]
  JointLimit limit;
};

enum class WrapShape { Cylinder, Sphere };

/// Wrapping surface fixed to a body. Cylinders constrain the path to one side
/// (`active_side`); spheres let it slide over the shorter great-circle side.
struct WrapSurface {
  std::string name;
  WrapShape shape = WrapShape::Cylinder;
  Body body = Body::Torso;
  Vec3d center;        ///< in the body frame [m]
  Vec3d axis{0, 0, 1}; ///< cylinder axis, unit direction in the body frame
  double radius = 0.02;
  int active_side = 1;  ///< +1: path travels counter-clockwise about `axis`; -1: clockwise
};

struct ViaPoint {
  Body body = Body::Torso;
  Vec3d position;           ///< in the body frame [m]
  std::optional<int> wrap;  ///< wrap cylinder for the segment that ends at this point
};

struct MusclePath {
  MuscleParams muscle;
  std::vector<ViaPoint> points;
  std::vector<int> spans;  ///< DOF indices crossed by the path
};

struct ArmModel {
  int model_format_version = kModelFormatVersion;
  Variant variant = Variant::Planar;
  Segment upper_arm;
  Segment forearm;
  Vec3d long_axis{1, 0, 0};  ///< proximal-to-distal direction of both segments in their own frames
  std::vector<Dof> dofs;
  bool gravity_on = false;
  double gravity = 9.81;
  CurveParams curves;
  std::vector<WrapSurface> wraps;
  std::vector<MusclePath> muscles;
  bool calibrated = false;

  int dof_count() const { return static_cast<int>(dofs.size()); }
  int muscle_count() const { return static_cast<int>(muscles.size()); }

  // Chain body index: 0 is the torso; joint k moves body k + 1.
  int body_index(Body b) const {
    switch (b) {
      case Body::Torso: return 0;
      case Body::UpperArm: return dof_count() - 1;
      case Body::Forearm: return dof_count();
    }
    return 0;
  }
  const Segment* segment_of_body(int index) const {
    if (index == body_index(Body::UpperArm)) return &upper_arm;
    if (index == body_index(Body::Forearm)) return &forearm;
    return nullptr;
  }
  int muscle_index(const std::string& name) const {
    for (int i = 0; i < muscle_count(); ++i)
      if (muscles[i].muscle.name == name) return i;
    return -1;
  }
};

struct JointState {
  DofVector theta;
  DofVector theta_dot;

  static JointState zero(int dofs) { return {DofVector::Zero(dofs), DofVector::Zero(dofs)}; }
};

inline void validate(const ArmModel& m) {
  if (m.model_format_version != kModelFormatVersion)
    throw ModelConfigError("unsupported model_format_version " + std::to_string(m.model_format_version));
  const int expected = m.variant == Variant::Planar ? 2 : 3;
  if (m.dof_count() != expected) throw ModelConfigError("variant " + to_string(m.variant) + " needs " + std::to_string(expected) + " DOFs");
  if (m.variant == Variant::Planar && m.gravity_on) throw ModelConfigError("the planar model is gravity compensated");
  for (const Segment* s : {&m.upper_arm, &m.forearm}) {
    if (!(s->length > 0 && s->mass > 0 && s->inertia > 0 && s->axial_inertia > 0))
      throw ModelConfigError("segment length, mass and inertias must be positive");
    if (!(s->inertia_about_com() > 0)) throw ModelConfigError("segment inertia is smaller than its parallel-axis term");
  }
  for (const Dof& d : m.dofs) {
    if (!(d.limit.lower < d.limit.upper)) throw ModelConfigError("joint '" + d.name + "': lower limit must be below upper");
    if (!(d.damping >= 0 && d.limit.stiffness >= 0 && d.limit.scale > 0 && d.limit.damping >= 0))
      throw ModelConfigError("joint '" + d.name + "': negative damping or stiffness");
    if (std::abs(norm(d.axis) - 1.0) > 1e-9) throw ModelConfigError("joint '" + d.name + "': axis not normalised");
  }
  for (const WrapSurface& w : m.wraps) {
    if (!(w.radius > 0)) throw ModelConfigError("wrap '" + w.name + "': radius must be positive");
    if (std::abs(norm(w.axis) - 1.0) > 1e-9) throw ModelConfigError("wrap '" + w.name + "': axis not normalised");
    if (w.active_side != 1 && w.active_side != -1) throw ModelConfigError("wrap '" + w.name + "': active_side must be +1 or -1");
  }
  for (const MusclePath& p : m.muscles) {
    validate(p.muscle);
    if (p.points.size() < 2) throw ModelConfigError("muscle '" + p.muscle.name + "' needs at least two via points");
    for (std::size_t i = 0; i < p.points.size(); ++i) {
      const auto& wrap = p.points[i].wrap;
      if (wrap && (i == 0 || *wrap < 0 || *wrap >= static_cast<int>(m.wraps.size())))
        throw ModelConfigError("muscle '" + p.muscle.name + "': bad wrap reference");
    }
    for (int d : p.spans)
      if (d < 0 || d >= m.dof_count()) throw ModelConfigError("muscle '" + p.muscle.name + "': bad span DOF");
  }
}

}  // namespace fesarm
