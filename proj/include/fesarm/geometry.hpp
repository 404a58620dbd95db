#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <type_traits>

#include "fesarm/dual.hpp"
#include "fesarm/errors.hpp"

namespace fesarm {

// Minimal 3-vector / 3x3 matrix templated on the scalar so that the same
// kinematics code runs on doubles and on Dual numbers.
template <class T>
struct Vec3 {
  T x{}, y{}, z{};

  Vec3() = default;
  Vec3(T x_, T y_, T z_) : x(x_), y(y_), z(z_) {}
  template <class U>
  static Vec3 from(const Vec3<U>& o) { return Vec3(T(o.x), T(o.y), T(o.z)); }

  Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
  Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
  friend Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
  friend Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
  friend Vec3 operator*(const T& s, const Vec3& a) { return {s * a.x, s * a.y, s * a.z}; }
  friend Vec3 operator*(const Vec3& a, const T& s) { return {a.x * s, a.y * s, a.z * s}; }
};

using Vec3d = Vec3<double>;

template <class T, class U>
auto dot(const Vec3<T>& a, const Vec3<U>& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

template <int N>
Dual<N> dot(const Vec3<Dual<N>>& a, const Vec3<Dual<N>>& b) {
  Dual<N> r(a.x.v * b.x.v + a.y.v * b.y.v + a.z.v * b.z.v);
  for (int k = 0; k < N; ++k)
    r.d[k] = a.x.d[k] * b.x.v + a.x.v * b.x.d[k] + a.y.d[k] * b.y.v + a.y.v * b.y.d[k] + a.z.d[k] * b.z.v +
             a.z.v * b.z.d[k];
  return r;
}

template <class T>
Vec3<T> cross(const Vec3<T>& a, const Vec3<T>& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

template <class T>
T norm(const Vec3<T>& a) {
  using std::sqrt;
  return sqrt(dot(a, a));
}

inline Vec3d normalized(const Vec3d& a) {
  const double n = norm(a);
  if (!(n > 0.0)) throw InvalidInput("cannot normalise a zero vector");
  return (1.0 / n) * a;
}

// Row-major 3x3 rotation matrix.
template <class T>
struct Mat3 {
  std::array<T, 9> m{};

  static Mat3 identity() {
    Mat3 r;
    r.m = {T(1.0), T(0.0), T(0.0), T(0.0), T(1.0), T(0.0), T(0.0), T(0.0), T(1.0)};
    return r;
  }
  const T& operator()(int i, int j) const { return m[3 * i + j]; }
  T& operator()(int i, int j) { return m[3 * i + j]; }

  template <class U>
  Vec3<T> operator*(const Vec3<U>& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z, m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }
  Vec3<T> operator*(const Vec3<double>& v) const
    requires(!std::is_same_v<T, double>)
  {
    return {fma3(m[0], m[1], m[2], v), fma3(m[3], m[4], m[5], v), fma3(m[6], m[7], m[8], v)};
  }

private:
  // a*v.x + b*v.y + c*v.z without intermediate temporaries (hot path for Dual).
  static T fma3(const T& a, const T& b, const T& c, const Vec3<double>& v) {
    T r(a.v * v.x + b.v * v.y + c.v * v.z);
    for (std::size_t k = 0; k < r.d.size(); ++k) r.d[k] = a.d[k] * v.x + b.d[k] * v.y + c.d[k] * v.z;
    return r;
  }

public:
  Mat3 operator*(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r(i, j) = (*this)(i, 0) * o(0, j) + (*this)(i, 1) * o(1, j) + (*this)(i, 2) * o(2, j);
    return r;
  }
  Vec3<T> transpose_times(const Vec3<T>& v) const {
    return {m[0] * v.x + m[3] * v.y + m[6] * v.z, m[1] * v.x + m[4] * v.y + m[7] * v.z,
            m[2] * v.x + m[5] * v.y + m[8] * v.z};
  }
};

// Rodrigues rotation about a fixed unit axis by angle theta.
template <class T>
Mat3<T> axis_rotation(const Vec3d& a, const T& theta) {
  using std::cos;
  using std::sin;
  const T c = cos(theta);
  const T s = sin(theta);
  const T k = 1.0 - c;
  Mat3<T> r;
  r(0, 0) = c + k * (a.x * a.x);
  r(0, 1) = k * (a.x * a.y) - s * a.z;
  r(0, 2) = k * (a.x * a.z) + s * a.y;
  r(1, 0) = k * (a.y * a.x) + s * a.z;
  r(1, 1) = c + k * (a.y * a.y);
  r(1, 2) = k * (a.y * a.z) - s * a.x;
  r(2, 0) = k * (a.z * a.x) - s * a.y;
  r(2, 1) = k * (a.z * a.y) + s * a.x;
  r(2, 2) = c + k * (a.z * a.z);
  return r;
}

/// Length of the shortest path from p to s in the plane that travels around a
/// circle of the given radius centred at the origin, counter-clockwise when
/// side = +1 and clockwise when side = -1.
///
/// The circle only interacts with the path when the straight segment would
/// violate the active side, i.e. when the centre lies less than `radius` to
/// the left of the travel direction (after mirroring for side = -1) and the
/// foot of the perpendicular falls strictly inside the segment. The wrapped
/// length is tangent + arc + tangent. At the onset of contact the arc angle
/// is zero, so the length is continuous across the transition.
template <class T>
T planar_wrap_length(T px, T py, T sx, T sy, double radius, int side, bool* wrapped = nullptr) {
  using std::acos;
  using std::atan2;
  using std::sqrt;
  if (side < 0) {
    py = -py;
    sy = -sy;
  }
  const T dx = sx - px;
  const T dy = sy - py;
  const T seg2 = dx * dx + dy * dy;
  const T seg = sqrt(seg2);
  const T rp2 = px * px + py * py;
  const T rs2 = sx * sx + sy * sy;
  const double r2 = radius * radius;
  if (value_of(rp2) <= r2 || value_of(rs2) <= r2)
    throw ModelConfigError("muscle via point lies inside its wrap cylinder");
  if (wrapped) *wrapped = false;
  if (value_of(seg2) <= 0.0) return seg;

  const double left_distance = value_of((px * sy - py * sx) / seg);
  const double foot = value_of(-(px * dx + py * dy) / seg2);
  if (!(left_distance < radius && foot > 0.0 && foot < 1.0)) return seg;

  const T rp = sqrt(rp2);
  const T rs = sqrt(rs2);
  T sweep = atan2(sy, sx) - atan2(py, px);
  if (value_of(sweep) < 0.0) sweep = sweep + 2.0 * std::numbers::pi;
  const T arc = sweep - acos(radius / rp) - acos(radius / rs);
  if (value_of(arc) <= 0.0) return seg;
  if (wrapped) *wrapped = true;
  return sqrt(rp2 - r2) + sqrt(rs2 - r2) + radius * arc;
}

}  // namespace fesarm
