#pragma once

// Quaternion and vector math for head orientation.
//
// Conventions: right-handed world frame, z up, yaw about +z, the forward
// axis of an orientation is its image of +x. Angles are radians internally;
// degrees only appear at configuration and file boundaries.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <ostream>

#include "headsim/error.hpp"

namespace headsim {

inline constexpr double kPi = std::numbers::pi;

constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

struct Vec3 {
  double x{0.0};
  double y{0.0};
  double z{0.0};

  constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  constexpr Vec3 operator-() const { return {-x, -y, -z}; }
  constexpr Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  constexpr bool operator==(const Vec3&) const = default;

  constexpr double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  constexpr Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm() const { return std::sqrt(dot(*this)); }
  double norm_xy() const { return std::hypot(x, y); }
};

constexpr Vec3 operator*(double s, const Vec3& v) { return v * s; }

inline std::ostream& operator<<(std::ostream& os, const Vec3& v) {
  return os << '(' << v.x << ", " << v.y << ", " << v.z << ')';
}

/// Rotation represented by a unit quaternion (w, x, y, z).
///
/// Every factory normalizes, so a value of this type always has norm 1 to
/// within floating-point rounding. q and -q are the same rotation; use
/// angular_distance or same_rotation to compare, never operator==.
class UnitQuaternion {
 public:
  constexpr UnitQuaternion() = default;

  /// Normalizes (w, x, y, z). Throws ContractViolation on a zero or
  /// non-finite input.
  static UnitQuaternion normalized(double w, double x, double y, double z) {
    const double n = std::sqrt(w * w + x * x + y * y + z * z);
    if (!(n > 1e-12) || !std::isfinite(n)) {
      throw ContractViolation("quaternion has zero or non-finite norm");
    }
    return UnitQuaternion(w / n, x / n, y / n, z / n);
  }

  /// Accepts components that must already be unit-norm within 1e-6.
  static UnitQuaternion checked(double w, double x, double y, double z) {
    const double n = std::sqrt(w * w + x * x + y * y + z * z);
    if (!std::isfinite(n) || std::abs(n - 1.0) > 1e-6) {
      throw ContractViolation("quaternion is not unit-norm (|q| = " + std::to_string(n) + ")");
    }
    return UnitQuaternion(w / n, x / n, y / n, z / n);
  }

  static constexpr UnitQuaternion identity() { return {}; }

  static UnitQuaternion from_axis_angle(const Vec3& axis, double angle) {
    const double n = axis.norm();
    if (!(n > 1e-12)) throw ContractViolation("rotation axis has zero length");
    const double s = std::sin(angle / 2.0) / n;
    return normalized(std::cos(angle / 2.0), axis.x * s, axis.y * s, axis.z * s);
  }

  static UnitQuaternion from_yaw(double yaw) {
    return UnitQuaternion(std::cos(yaw / 2.0), 0.0, 0.0, std::sin(yaw / 2.0));
  }

  /// Yaw about +z followed by pitch about the rotated +y (positive looks down).
  static UnitQuaternion from_yaw_pitch(double yaw, double pitch) {
    return from_yaw(yaw) * from_axis_angle({0.0, 1.0, 0.0}, pitch);
  }

  /// Orientation whose forward axis points along `dir` with no roll.
  static UnitQuaternion looking_along(const Vec3& dir) {
    const double horiz = dir.norm_xy();
    if (!(dir.norm() > 1e-12)) throw ContractViolation("look direction has zero length");
    const double yaw = std::atan2(dir.y, dir.x);
    const double pitch = -std::atan2(dir.z, horiz);
    return from_yaw_pitch(yaw, pitch);
  }

  constexpr double w() const { return w_; }
  constexpr double x() const { return x_; }
  constexpr double y() const { return y_; }
  constexpr double z() const { return z_; }
  constexpr std::array<double, 4> components() const { return {w_, x_, y_, z_}; }

  constexpr double dot(const UnitQuaternion& o) const {
    return w_ * o.w_ + x_ * o.x_ + y_ * o.y_ + z_ * o.z_;
  }
  double norm() const { return std::sqrt(dot(*this)); }

  constexpr UnitQuaternion conjugate() const { return UnitQuaternion(w_, -x_, -y_, -z_); }
  constexpr UnitQuaternion negated() const { return UnitQuaternion(-w_, -x_, -y_, -z_); }

  /// Hamilton product; the result is renormalized to stop drift.
  UnitQuaternion operator*(const UnitQuaternion& o) const {
    return normalized(w_ * o.w_ - x_ * o.x_ - y_ * o.y_ - z_ * o.z_,
                      w_ * o.x_ + x_ * o.w_ + y_ * o.z_ - z_ * o.y_,
                      w_ * o.y_ - x_ * o.z_ + y_ * o.w_ + z_ * o.x_,
                      w_ * o.z_ + x_ * o.y_ - y_ * o.x_ + z_ * o.w_);
  }

  Vec3 rotate(const Vec3& v) const {
    const Vec3 u{x_, y_, z_};
    const Vec3 t = u.cross(v) * 2.0;
    return v + t * w_ + u.cross(t);
  }

  Vec3 forward() const { return rotate({1.0, 0.0, 0.0}); }

  /// Heading of the forward axis projected onto the ground plane.
  double yaw() const {
    const Vec3 f = forward();
    return std::atan2(f.y, f.x);
  }

  /// Exact component equality. Sign-sensitive; intended for serialization tests.
  constexpr bool bitwise_equal(const UnitQuaternion& o) const {
    return w_ == o.w_ && x_ == o.x_ && y_ == o.y_ && z_ == o.z_;
  }

 private:
  constexpr UnitQuaternion(double w, double x, double y, double z) : w_(w), x_(x), y_(y), z_(z) {}

  double w_{1.0};
  double x_{0.0};
  double y_{0.0};
  double z_{0.0};
};

inline std::ostream& operator<<(std::ostream& os, const UnitQuaternion& q) {
  return os << '[' << q.w() << ", " << q.x() << ", " << q.y() << ", " << q.z() << ']';
}

/// Turn rate in degrees per second; strictly positive.
class AngularRate {
 public:
  constexpr AngularRate() = default;
  explicit AngularRate(double deg_per_s) : deg_per_s_(deg_per_s) {
    if (!(deg_per_s > 0.0) || !std::isfinite(deg_per_s)) {
      throw ContractViolation("angular rate must be positive");
    }
  }
  constexpr double degrees_per_second() const { return deg_per_s_; }
  constexpr double radians_per_second() const { return deg_to_rad(deg_per_s_); }

 private:
  double deg_per_s_{36.0};
};

/// Rotation angle between two orientations, in [0, pi]. Sign-invariant.
/// Computed from chord lengths rather than acos(|dot|), which loses about
/// half the mantissa for nearly equal rotations.
inline double angular_distance(const UnitQuaternion& a, const UnitQuaternion& b) {
  const double s = a.dot(b) < 0.0 ? -1.0 : 1.0;
  double minus = 0.0, plus = 0.0;
  const auto ca = a.components(), cb = b.components();
  for (std::size_t i = 0; i < 4; ++i) {
    const double d = ca[i] - s * cb[i], e = ca[i] + s * cb[i];
    minus += d * d;
    plus += e * e;
  }
  return std::min(kPi, 4.0 * std::atan2(std::sqrt(minus), std::sqrt(plus)));
}

inline bool same_rotation(const UnitQuaternion& a, const UnitQuaternion& b, double tol = 1e-9) {
  return angular_distance(a, b) <= tol;
}

/// Shortest-arc spherical interpolation.
inline UnitQuaternion slerp(const UnitQuaternion& a, const UnitQuaternion& b, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw ContractViolation("slerp parameter outside [0, 1]");
  UnitQuaternion end = b;
  double c = a.dot(b);
  if (c < 0.0) {
    end = b.negated();
    c = -c;
  }
  c = std::min(c, 1.0);
  double wa;
  double wb;
  if (c > 1.0 - 1e-12) {
    // Nearly parallel: the lerp below is then exact to rounding.
    wa = 1.0 - t;
    wb = t;
  } else {
    const double theta = std::acos(c);
    const double s = std::sin(theta);
    wa = std::sin((1.0 - t) * theta) / s;
    wb = std::sin(t * theta) / s;
  }
  return UnitQuaternion::normalized(wa * a.w() + wb * end.w(), wa * a.x() + wb * end.x(),
                                    wa * a.y() + wb * end.y(), wa * a.z() + wb * end.z());
}

/// Rotates `current` toward `target` along the shortest arc by at most
/// rate * dt. Returns `target` itself once the remaining angle is covered.
inline UnitQuaternion step_toward(const UnitQuaternion& current, const UnitQuaternion& target,
                                  AngularRate rate, double dt) {
  if (dt < 0.0) throw ContractViolation("negative time step");
  const double remaining = angular_distance(current, target);
  const double budget = rate.radians_per_second() * dt;
  if (remaining <= budget) return target;
  return slerp(current, target, budget / remaining);
}

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

}  // namespace headsim
