#pragma once

#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cmm/geometry.hpp"

namespace cmm {

/// Straight road corridor: a centerline from `start` to `end` widened by
/// `half_width` on each side.
class RoadSegment {
 public:
  RoadSegment(Point2 start, Point2 end, double half_width)
      : start_(start), end_(end), half_width_(half_width) {
    if (!is_finite(start) || !is_finite(end) || start == end) {
      throw std::invalid_argument("road segment needs two distinct finite endpoints");
    }
    if (!(half_width > 0.0) || !std::isfinite(half_width)) {
      throw std::invalid_argument("road segment half_width must be positive");
    }
  }

  Point2 start() const { return start_; }
  Point2 end() const { return end_; }
  double half_width() const { return half_width_; }
  double length() const { return distance(start_, end_); }

  /// Direction of travel from start to end, radians in (-pi, pi].
  double heading() const { return std::atan2(end_.y - start_.y, end_.x - start_.x); }

  double centerline_distance(Point2 p) const { return point_segment_distance(p, start_, end_); }

  /// Signed distance to the corridor boundary: <= 0 inside, > 0 outside.
  double boundary_distance(Point2 p) const { return centerline_distance(p) - half_width_; }

 private:
  Point2 start_;
  Point2 end_;
  double half_width_;
};

/// Immutable collection of road corridors.
class RoadMap {
 public:
  explicit RoadMap(std::vector<RoadSegment> segments) : segments_(std::move(segments)) {
    if (segments_.empty()) throw std::invalid_argument("road map must contain at least one segment");
  }

  const std::vector<RoadSegment>& segments() const { return segments_; }
  std::size_t size() const { return segments_.size(); }

  /// Signed distance to the nearest corridor boundary (<= 0 means on road).
  double boundary_distance(Point2 p) const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& s : segments_) best = std::fmin(best, s.boundary_distance(p));
    return best;
  }

  /// Indices of the segments that can be nearest for some point in `box`.
  /// Every other segment is farther than one of these for all points of the
  /// box, so restricting a nearest-corridor query to the result is exact.
  std::vector<std::size_t> candidates(const Box2& box) const {
    std::vector<std::size_t> out;
    if (box.empty()) return out;
    double bound = std::numeric_limits<double>::infinity();
    std::vector<double> lower(segments_.size());
    for (std::size_t k = 0; k < segments_.size(); ++k) {
      const auto& s = segments_[k];
      lower[k] = box_segment_distance(box, s.start(), s.end()) - s.half_width();
      bound = std::fmin(bound, box_segment_max_distance(box, s.start(), s.end()) - s.half_width());
    }
    for (std::size_t k = 0; k < segments_.size(); ++k) {
      if (lower[k] <= bound) out.push_back(k);
    }
    return out;
  }

  double boundary_distance(Point2 p, const std::vector<std::size_t>& subset) const {
    double best = std::numeric_limits<double>::infinity();
    for (auto k : subset) best = std::fmin(best, segments_[k].boundary_distance(p));
    return best;
  }

 private:
  std::vector<RoadSegment> segments_;
};

/// True iff p lies inside (or on the edge of) at least one corridor.
inline bool point_on_road(const RoadMap& map, Point2 p) { return map.boundary_distance(p) <= 0.0; }

namespace detail {

// Log of the corridor likelihood given the signed boundary distance.
inline double log_likelihood_from_distance(double d, double softness) {
  if (d <= 0.0) return 0.0;
  if (softness <= 0.0) return -std::numeric_limits<double>::infinity();
  return -(d * d) / (2.0 * softness * softness);
}

}  // namespace detail

/// Graded road constraint: 1 on road, Gaussian fall-off with the distance
/// to the nearest corridor edge outside. softness == 0 gives the hard test.
inline double constraint_likelihood(const RoadMap& map, Point2 p, double softness) {
  if (softness < 0.0) throw std::invalid_argument("softness must be non-negative");
  return std::exp(detail::log_likelihood_from_distance(map.boundary_distance(p), softness));
}

/// Length-weighted histogram of undirected headings over [0, 180) degrees.
inline std::vector<double> road_angle_histogram(const RoadMap& map, std::size_t bins) {
  if (bins == 0) throw std::invalid_argument("histogram needs at least one bin");
  std::vector<double> counts(bins, 0.0);
  const double width = 180.0 / static_cast<double>(bins);
  for (const auto& s : map.segments()) {
    double deg = std::fmod(s.heading() * 180.0 / std::numbers::pi, 180.0);
    if (deg < 0.0) deg += 180.0;
    auto idx = static_cast<std::size_t>(deg / width);
    if (idx >= bins) idx = bins - 1;
    counts[idx] += s.length();
  }
  return counts;
}

/// Parses rows of `x1 y1 x2 y2 half_width`. '#' starts a comment.
inline RoadMap parse_road_map(std::istream& in) {
  std::vector<RoadSegment> segments;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream row(line);
    double x1, y1, x2, y2, hw;
    if (!(row >> x1)) continue;
    if (!(row >> y1 >> x2 >> y2 >> hw)) {
      throw std::runtime_error("map line " + std::to_string(lineno) + ": expected x1 y1 x2 y2 half_width");
    }
    std::string extra;
    if (row >> extra) throw std::runtime_error("map line " + std::to_string(lineno) + ": trailing data");
    segments.emplace_back(Point2{x1, y1}, Point2{x2, y2}, hw);
  }
  return RoadMap(std::move(segments));
}

inline RoadMap load_road_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open map file: " + path);
  return parse_road_map(in);
}

}  // namespace cmm
