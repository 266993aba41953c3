#pragma once

#include <cmath>

namespace intent {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2& operator+=(const Vec2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  double norm() const { return std::hypot(x, y); }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  bool finite() const { return std::isfinite(x) && std::isfinite(y); }
};

// Normalizes an angle to (-pi, pi].
inline double wrap_angle(double a) {
  const double two_pi = 2.0 * M_PI;
  a = std::fmod(a + M_PI, two_pi);
  if (a <= 0.0) a += two_pi;
  return a - M_PI;
}

// Rotates v counter-clockwise by angle (radians).
inline Vec2 rotate(const Vec2& v, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

// World pose of an agent: position in meters, heading counter-clockwise from +x.
struct Pose2D {
  Vec2 position;
  double heading = 0.0;

  Pose2D() = default;
  Pose2D(Vec2 pos, double head) : position(pos), heading(wrap_angle(head)) {}
};

}  // namespace intent
