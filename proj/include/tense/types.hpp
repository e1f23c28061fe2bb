#pragma once

#include <Eigen/Core>

namespace tense {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

/// Axis-aligned rectangle used as the emulator input domain.
struct Box2 {
  double xmin = 0.0;
  double xmax = 1.0;
  double ymin = 0.0;
  double ymax = 1.0;

  bool contains(const Vec2& p) const {
    return p.x() >= xmin && p.x() <= xmax && p.y() >= ymin && p.y() <= ymax;
  }
  double width(int axis) const { return axis == 0 ? xmax - xmin : ymax - ymin; }
};

/// Straight segment, used to describe tear lines and boundary polylines.
struct Segment {
  Vec2 a = Vec2::Zero();
  Vec2 b = Vec2::Zero();
};

inline double point_segment_distance(const Vec2& p, const Segment& s) {
  const Vec2 d = s.b - s.a;
  const double len_sq = d.squaredNorm();
  if (len_sq == 0.0) return (p - s.a).norm();
  double t = (p - s.a).dot(d) / len_sq;
  t = std::min(1.0, std::max(0.0, t));
  return (p - (s.a + t * d)).norm();
}

}  // namespace tense
