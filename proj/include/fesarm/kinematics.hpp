#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "fesarm/arm_model.hpp"
#include "fesarm/dual.hpp"
#include "fesarm/geometry.hpp"

namespace fesarm {

template <class T>
struct BodyFrames {
  std::array<Mat3<T>, kMaxDofs + 1> rot;
  std::array<Vec3<T>, kMaxDofs + 1> pos;

  Vec3<T> to_world(int body, const Vec3d& local) const { return pos[body] + rot[body] * local; }
};

template <class T>
BodyFrames<T> body_frames(const ArmModel& m, const std::array<T, kMaxDofs>& theta) {
  BodyFrames<T> f;
  f.rot[0] = Mat3<T>::identity();
  f.pos[0] = Vec3<T>(T(0.0), T(0.0), T(0.0));
  for (int k = 0; k < m.dof_count(); ++k) {
    const Dof& d = m.dofs[k];
    f.pos[k + 1] = f.pos[k] + f.rot[k] * d.offset;
    f.rot[k + 1] = f.rot[k] * axis_rotation(d.axis, theta[k]);
  }
  return f;
}

inline std::array<double, kMaxDofs> to_array(const DofVector& v) {
  std::array<double, kMaxDofs> a{};
  for (int i = 0; i < v.size(); ++i) a[i] = v[i];
  return a;
}

// Right-handed in-plane basis (e1, e2) for a wrap cylinder with the given axis.
inline std::array<Vec3d, 2> cylinder_basis(const Vec3d& axis) {
  const Vec3d helper = std::abs(axis.x) < 0.9 ? Vec3d(1, 0, 0) : Vec3d(0, 1, 0);
  const Vec3d e1 = normalized(cross(axis, helper));
  return {e1, cross(axis, e1)};
}

template <class T>
T wrapped_segment_length(const ArmModel& m, const BodyFrames<T>& f, const WrapSurface& w, const Vec3<T>& from,
                         const Vec3<T>& to) {
  using std::sqrt;
  const int wb = m.body_index(w.body);
  const Vec3<T> c = f.to_world(wb, w.center);
  const Vec3<T> p = from - c;
  const Vec3<T> s = to - c;
  const Vec3<T> delta = to - from;
  if (w.shape == WrapShape::Sphere) {
    // The geodesic lies in the plane through the centre and both endpoints.
    const T rp = norm(p);
    const Vec3<T> e1 = (1.0 / rp) * p;
    const T along = dot(s, e1);
    const Vec3<T> perp = s - along * e1;
    const T across = norm(perp);
    if (value_of(across) < 1e-12) return norm(delta);
    return planar_wrap_length(rp, T(0.0), along, across, w.radius, +1);
  }
  const auto basis = cylinder_basis(w.axis);
  const Vec3<T> e1 = f.rot[wb] * basis[0];
  const Vec3<T> e2 = f.rot[wb] * basis[1];
  bool wrapped = false;
  const T planar = planar_wrap_length(dot(p, e1), dot(p, e2), dot(s, e1), dot(s, e2), w.radius, w.active_side, &wrapped);
  if (!wrapped) return norm(delta);
  const T rise = dot(delta, f.rot[wb] * w.axis);
  return sqrt(planar * planar + rise * rise);
}

/// Musculotendon path length: straight segments between via points, with a
/// tangent-arc-tangent detour where a segment contacts its wrap surface. For a
/// cylinder the detour is solved in the plane normal to the axis and the axial
/// rise is spread uniformly over the unrolled path (a helix on the cylinder).
template <class T>
T path_length(const ArmModel& m, const BodyFrames<T>& f, const MusclePath& path) {
  using std::sqrt;
  T total(0.0);
  Vec3<T> prev = f.to_world(m.body_index(path.points[0].body), path.points[0].position);
  for (std::size_t i = 1; i < path.points.size(); ++i) {
    const ViaPoint& vp = path.points[i];
    const Vec3<T> cur = f.to_world(m.body_index(vp.body), vp.position);
    if (!vp.wrap) {
      total += norm(cur - prev);
    } else {
      total += wrapped_segment_length(m, f, m.wraps[*vp.wrap], prev, cur);
    }
    prev = cur;
  }
  return total;
}

/// Lengths and length gradients dL/dtheta for every muscle at one posture.
struct MuscleGeometry {
  std::vector<double> length;
  std::vector<std::array<double, kMaxDofs>> dlength;  ///< dL/dtheta_d; the moment arm is its negation

  double moment_arm(int muscle, int dof) const { return -dlength[muscle][dof]; }
  // Length rate for the given joint velocities.
  double velocity(int muscle, const DofVector& theta_dot) const {
    double v = 0.0;
    for (int d = 0; d < theta_dot.size(); ++d) v += dlength[muscle][d] * theta_dot[d];
    return v;
  }
};

inline void muscle_geometry(const ArmModel& m, const DofVector& theta, MuscleGeometry& out) {
  using D = Dual<kMaxDofs>;
  std::array<D, kMaxDofs> q{};
  for (int d = 0; d < m.dof_count(); ++d) q[d] = D::variable(theta[d], d);
  const BodyFrames<D> f = body_frames(m, q);
  out.length.resize(m.muscles.size());
  out.dlength.resize(m.muscles.size());
  for (std::size_t i = 0; i < m.muscles.size(); ++i) {
    const D l = path_length(m, f, m.muscles[i]);
    out.length[i] = l.v;
    out.dlength[i] = l.d;
  }
}

inline MuscleGeometry muscle_geometry(const ArmModel& m, const DofVector& theta) {
  MuscleGeometry g;
  muscle_geometry(m, theta, g);
  return g;
}

inline void check_muscle_index(const ArmModel& m, int muscle) {
  if (muscle < 0 || muscle >= m.muscle_count()) throw InvalidInput("muscle index out of range");
}

inline double mtu_length(const ArmModel& m, const DofVector& theta, int muscle) {
  check_muscle_index(m, muscle);
  const BodyFrames<double> f = body_frames(m, to_array(theta));
  return path_length(m, f, m.muscles[muscle]);
}

/// Signed moment arm -dL/dtheta: positive means tension drives the DOF positive.
inline double moment_arm(const ArmModel& m, const DofVector& theta, int muscle, int dof) {
  check_muscle_index(m, muscle);
  if (dof < 0 || dof >= m.dof_count()) throw InvalidInput("DOF index out of range");
  using D = Dual<kMaxDofs>;
  std::array<D, kMaxDofs> q{};
  for (int d = 0; d < m.dof_count(); ++d) q[d] = D::variable(theta[d], d);
  return -path_length(m, body_frames(m, q), m.muscles[muscle]).d[dof];
}

inline Vec3d elbow_position(const ArmModel& m, const DofVector& theta) {
  const auto f = body_frames(m, to_array(theta));
  return f.pos[m.body_index(Body::Forearm)];
}

inline Vec3d hand_position(const ArmModel& m, const DofVector& theta) {
  const auto f = body_frames(m, to_array(theta));
  return f.to_world(m.body_index(Body::Forearm), m.forearm.length * m.long_axis);
}

}  // namespace fesarm
