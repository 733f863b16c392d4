#include "toolmeta/envs/geometry.hpp"

#include <algorithm>
#include <numbers>

namespace toolmeta::envs {

bool Box::contains(Vec2 p) const {
  const Vec2 local = rotate(p - center, -angle);
  return std::abs(local.x) <= half_length && std::abs(local.y) <= half_width;
}

Vec2 Box::closest_point(Vec2 p) const {
  const Vec2 local = rotate(p - center, -angle);
  const Vec2 clamped{std::clamp(local.x, -half_length, half_length),
                     std::clamp(local.y, -half_width, half_width)};
  return rotate(clamped, angle) + center;
}

Box Box::transformed(const Pose2& pose) const {
  Box b = *this;
  b.center = pose.apply(center);
  b.angle = angle + pose.yaw;
  return b;
}

std::optional<Contact> disc_box_contact(const Disc& disc, const Box& box) {
  const Vec2 local = rotate(disc.center - box.center, -box.angle);
  const bool inside = std::abs(local.x) <= box.half_length && std::abs(local.y) <= box.half_width;
  if (!inside) {
    const Vec2 closest = box.closest_point(disc.center);
    const Vec2 d = closest - disc.center;
    const double dist = d.norm();
    if (dist >= disc.radius || dist == 0.0) return std::nullopt;
    return Contact{d * (1.0 / dist), disc.radius - dist, closest};
  }
  // Centre inside: push out through the nearest face.
  const double dx = box.half_length - std::abs(local.x);
  const double dy = box.half_width - std::abs(local.y);
  Vec2 n_local, p_local;
  double depth;
  if (dx < dy) {
    const double s = local.x >= 0 ? 1.0 : -1.0;
    n_local = {-s, 0.0};  // from disc towards box interior
    p_local = {s * box.half_length, local.y};
    depth = dx + disc.radius;
  } else {
    const double s = local.y >= 0 ? 1.0 : -1.0;
    n_local = {0.0, -s};
    p_local = {local.x, s * box.half_width};
    depth = dy + disc.radius;
  }
  return Contact{rotate(n_local, box.angle), depth, rotate(p_local, box.angle) + box.center};
}

double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a + std::numbers::pi, two_pi);
  if (a < 0) a += two_pi;
  return a - std::numbers::pi;
}

}  // namespace toolmeta::envs
