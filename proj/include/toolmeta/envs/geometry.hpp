#pragma once

#include <array>
#include <cmath>
#include <optional>

namespace toolmeta::envs {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double cross(Vec2 o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
  bool operator==(const Vec2&) const = default;
};

inline Vec2 rotate(Vec2 v, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;

  Vec2 position() const { return {x, y}; }
  Vec2 apply(Vec2 local) const { return rotate(local, yaw) + position(); }
  bool operator==(const Pose2&) const = default;
};

/// Oriented rectangle.
struct Box {
  Vec2 center;
  double angle = 0.0;
  double half_length = 0.0;  // along the local x axis
  double half_width = 0.0;   // along the local y axis

  double area() const { return 4.0 * half_length * half_width; }
  bool contains(Vec2 p) const;
  Vec2 closest_point(Vec2 p) const;
  Box transformed(const Pose2& pose) const;
};

struct Disc {
  Vec2 center;
  double radius = 0.0;
};

/// Minimal translation that moves a box (or, with the opposite sign, a disc)
/// out of overlap. `normal` points from the disc towards the box.
struct Contact {
  Vec2 normal;
  double depth = 0.0;
  Vec2 point;  // contact point on the box boundary
};

std::optional<Contact> disc_box_contact(const Disc& disc, const Box& box);

double wrap_angle(double a);

}  // namespace toolmeta::envs
