#pragma once

#include <cmath>
#include <limits>

namespace cmm {

/// Planar vector in meters (east, north). Used for both points and offsets.
struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
  constexpr Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
  constexpr Vec2& operator*=(double s) { x *= s; y *= s; return *this; }

  friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr Vec2 operator-(Vec2 a) { return {-a.x, -a.y}; }
  friend constexpr Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend constexpr Vec2 operator*(Vec2 a, double s) { return {s * a.x, s * a.y}; }
  friend constexpr bool operator==(Vec2 a, Vec2 b) = default;
};

using Point2 = Vec2;

constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
constexpr double squared_norm(Vec2 a) { return dot(a, a); }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline double distance(Point2 a, Point2 b) { return norm(a - b); }
inline bool is_finite(Vec2 a) { return std::isfinite(a.x) && std::isfinite(a.y); }

// Distance from p to the closed segment [a, b].
inline double point_segment_distance(Point2 p, Point2 a, Point2 b) {
  const Vec2 ab = b - a;
  const double len2 = squared_norm(ab);
  double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
  t = t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t);
  return distance(p, a + t * ab);
}

/// Axis-aligned box, used to bound clouds of corrected positions.
struct Box2 {
  Point2 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  Point2 hi{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};

  void expand(Point2 p) {
    lo.x = std::fmin(lo.x, p.x);
    lo.y = std::fmin(lo.y, p.y);
    hi.x = std::fmax(hi.x, p.x);
    hi.y = std::fmax(hi.y, p.y);
  }
  bool empty() const { return lo.x > hi.x || lo.y > hi.y; }
  bool contains(Point2 p) const { return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y; }
};

namespace detail {

inline double orient(Point2 a, Point2 b, Point2 c) {
  return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

inline bool segments_intersect(Point2 p1, Point2 p2, Point2 q1, Point2 q2) {
  const double d1 = orient(q1, q2, p1);
  const double d2 = orient(q1, q2, p2);
  const double d3 = orient(p1, p2, q1);
  const double d4 = orient(p1, p2, q2);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0));
}

}  // namespace detail

// Minimum distance between a box and a segment; 0 if they touch.
inline double box_segment_distance(const Box2& box, Point2 a, Point2 b) {
  if (box.contains(a) || box.contains(b)) return 0.0;
  const Point2 c[4] = {box.lo, {box.hi.x, box.lo.y}, box.hi, {box.lo.x, box.hi.y}};
  for (int k = 0; k < 4; ++k) {
    if (detail::segments_intersect(a, b, c[k], c[(k + 1) % 4])) return 0.0;
  }
  double best = std::numeric_limits<double>::infinity();
  for (const auto& corner : c) best = std::fmin(best, point_segment_distance(corner, a, b));
  for (int k = 0; k < 4; ++k) {
    best = std::fmin(best, point_segment_distance(a, c[k], c[(k + 1) % 4]));
    best = std::fmin(best, point_segment_distance(b, c[k], c[(k + 1) % 4]));
  }
  return best;
}

// Maximum distance from any point of the box to the segment. Distance to a
// convex set is convex, so the maximum sits on a corner.
inline double box_segment_max_distance(const Box2& box, Point2 a, Point2 b) {
  const Point2 c[4] = {box.lo, {box.hi.x, box.lo.y}, box.hi, {box.lo.x, box.hi.y}};
  double worst = 0.0;
  for (const auto& corner : c) worst = std::fmax(worst, point_segment_distance(corner, a, b));
  return worst;
}

}  // namespace cmm
