#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cmm/roadmap.hpp"
#include "cmm/vehicle_net.hpp"

namespace cmm {

/// Road map, vehicle placement and communication structure of one experiment.
struct Scenario {
  std::string name;
  RoadMap map{{RoadSegment({0.0, 0.0}, {1.0, 0.0}, 1.0)}};
  std::vector<VehiclePose> poses;
  VehicleNetwork network;       // undirected graph (symmetrized if the matrix is directed)
  ConnectionMatrix support{0};  // receive matrix: row i lists whose data node i gets
  std::vector<NodeId> original_ids;  // ids before degree trimming

  std::size_t size() const { return poses.size(); }

  /// Own measurement plus every source's, in ascending node order.
  std::vector<NodeId> measurement_group(NodeId i) const {
    std::vector<NodeId> g;
    for (NodeId j = 0; j < size(); ++j) {
      if (support(i, j)) g.push_back(j);
    }
    return g;
  }
};

/// Declarative description, as read from a scenario file.
struct ScenarioSpec {
  std::string name = "custom";
  std::optional<RoadMap> map;
  std::vector<VehiclePose> poses;
  struct Sample {
    std::size_t n = 0;
    std::uint64_t seed = 0;
    double spread = 0.0;
  };
  std::optional<Sample> sample;
  std::optional<double> radius;
  std::optional<std::size_t> trim_degree;
  std::optional<std::vector<std::vector<int>>> connection_matrix;
};

/// Turns a spec into a concrete scenario: place vehicles, build the radius
/// graph or take the explicit matrix, then trim by degree if requested.
inline Scenario build_scenario(const ScenarioSpec& spec) {
  if (!spec.map) throw std::invalid_argument("scenario '" + spec.name + "' has no road map");
  Scenario sc;
  sc.name = spec.name;
  sc.map = *spec.map;
  if (spec.sample) {
    sc.poses = sample_poses(sc.map, spec.sample->n, spec.sample->seed, spec.sample->spread);
  } else {
    sc.poses = spec.poses;
  }
  if (sc.poses.empty()) throw std::invalid_argument("scenario '" + spec.name + "' has no vehicles");
  for (const auto& p : sc.poses) {
    if (!point_on_road(sc.map, p.position)) {
      throw std::invalid_argument("scenario '" + spec.name + "' places a vehicle off the road");
    }
  }

  if (spec.connection_matrix) {
    if (spec.connection_matrix->size() != sc.poses.size()) {
      throw std::invalid_argument("connection matrix size does not match vehicle count");
    }
    if (spec.trim_degree) throw std::invalid_argument("trim_degree cannot be combined with an explicit matrix");
    sc.support = ConnectionMatrix::from_rows(*spec.connection_matrix);
    sc.network = sc.support.symmetrized(sc.poses);
    for (NodeId i = 0; i < sc.size(); ++i) sc.original_ids.push_back(i);
    return sc;
  }
  if (!spec.radius) throw std::invalid_argument("scenario '" + spec.name + "' needs radius or connection_matrix");
  VehicleNetwork net = radius_graph(sc.poses, *spec.radius);
  if (spec.trim_degree) {
    auto trimmed = trim_by_degree(net, *spec.trim_degree);
    if (trimmed.kept.empty()) throw std::invalid_argument("degree trimming removed every vehicle");
    net = std::move(trimmed.network);
    sc.original_ids = std::move(trimmed.kept);
    sc.poses = net.poses();
  } else {
    for (NodeId i = 0; i < sc.size(); ++i) sc.original_ids.push_back(i);
  }
  sc.network = std::move(net);
  sc.support = ConnectionMatrix::from_network(sc.network);
  return sc;
}

/// Scenario file: `key: value` lines plus the row sections `segments:`,
/// `poses:` (x y angle) and `connection_matrix:`. '#' starts a comment.
/// `map: <path>` is resolved relative to `base_dir`.
inline ScenarioSpec parse_scenario(std::istream& in, const std::filesystem::path& base_dir = {}) {
  ScenarioSpec spec;
  std::vector<RoadSegment> segments;
  std::vector<std::vector<int>> matrix;
  std::string section;
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& what) {
    throw std::runtime_error("scenario line " + std::to_string(lineno) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (auto colon = line.find(':'); colon != std::string::npos) {
      std::string key = line.substr(0, colon);
      key.erase(0, key.find_first_not_of(" \t"));
      key.erase(key.find_last_not_of(" \t") + 1);
      std::istringstream value(line.substr(colon + 1));
      section.clear();
      if (key == "name") {
        value >> spec.name;
      } else if (key == "map") {
        std::string path;
        value >> path;
        spec.map = load_road_map((base_dir / path).string());
      } else if (key == "radius") {
        double r;
        if (!(value >> r)) fail("radius expects a number");
        spec.radius = r;
      } else if (key == "trim_degree") {
        std::size_t d;
        if (!(value >> d)) fail("trim_degree expects a count");
        spec.trim_degree = d;
      } else if (key == "sample") {
        ScenarioSpec::Sample s;
        if (!(value >> s.n >> s.seed >> s.spread)) fail("sample expects: n seed spread");
        spec.sample = s;
      } else if (key == "segments" || key == "poses" || key == "connection_matrix") {
        section = key;
      } else {
        fail("unknown key '" + key + "'");
      }
      continue;
    }
    std::istringstream row(line);
    if (section == "segments") {
      double x1, y1, x2, y2, hw;
      if (!(row >> x1 >> y1 >> x2 >> y2 >> hw)) fail("segment row expects x1 y1 x2 y2 half_width");
      segments.emplace_back(Point2{x1, y1}, Point2{x2, y2}, hw);
    } else if (section == "poses") {
      double x, y, a;
      if (!(row >> x >> y >> a)) fail("pose row expects x y angle");
      spec.poses.push_back({{x, y}, a});
    } else if (section == "connection_matrix") {
      std::vector<int> r;
      for (int v; row >> v;) {
        if (v != 0 && v != 1) fail("connection matrix entries must be 0 or 1");
        r.push_back(v);
      }
      matrix.push_back(std::move(r));
    } else {
      fail("data row outside a section");
    }
  }
  if (!segments.empty()) {
    if (spec.map) throw std::runtime_error("scenario gives both map: and segments:");
    spec.map = RoadMap(std::move(segments));
  }
  if (!matrix.empty()) spec.connection_matrix = std::move(matrix);
  if (spec.sample && !spec.poses.empty()) throw std::runtime_error("scenario gives both sample: and poses:");
  return spec;
}

inline ScenarioSpec load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file: " + path);
  return parse_scenario(in, std::filesystem::path(path).parent_path());
}

// ---------------------------------------------------------------------------
// Built-in scenarios
// ---------------------------------------------------------------------------

/// Two orthogonal corridors crossing at the origin with one vehicle on the
/// centerline of each arm (east, north, west, south). Each vehicle hears only
/// the next one around the intersection.
inline ScenarioSpec four_vehicle_spec() {
  constexpr double kHalfPi = std::numbers::pi / 2.0;
  ScenarioSpec spec;
  spec.name = "four_vehicle";
  spec.map = RoadMap({RoadSegment({-400.0, 0.0}, {400.0, 0.0}, 2.0), RoadSegment({0.0, -400.0}, {0.0, 400.0}, 2.0)});
  spec.poses = {
      {{120.0, 0.0}, 0.0},
      {{0.0, 140.0}, kHalfPi},
      {{-90.0, 0.0}, 0.0},
      {{0.0, -100.0}, kHalfPi},
  };
  spec.connection_matrix = std::vector<std::vector<int>>{
      {1, 1, 0, 0},
      {0, 1, 1, 0},
      {0, 0, 1, 1},
      {1, 0, 0, 1},
  };
  return spec;
}

/// Synthetic city: an 8.5 km square grid of 1 km blocks (the last row and
/// column of blocks open), a denser downtown
/// with 250 m blocks, and two diagonal avenues.
inline RoadMap grid_city_map() {
  constexpr double kHw = 2.0;
  constexpr double kExtent = 4250.0;
  constexpr double kDowntown = 750.0;
  std::vector<RoadSegment> s;
  for (int k = -4; k <= 4; ++k) {
    const double c = -kExtent + 1000.0 * (k + 4);
    s.emplace_back(Point2{-kExtent, c}, Point2{kExtent, c}, kHw);
    s.emplace_back(Point2{c, -kExtent}, Point2{c, kExtent}, kHw);
  }
  for (double c = -kDowntown + 125.0; c < kDowntown; c += 250.0) {
    s.emplace_back(Point2{-kDowntown, c}, Point2{kDowntown, c}, kHw);
    s.emplace_back(Point2{c, -kDowntown}, Point2{c, kDowntown}, kHw);
  }
  s.emplace_back(Point2{-kExtent, -kExtent}, Point2{kExtent, kExtent}, kHw);
  s.emplace_back(Point2{-kExtent, 0.3 * kExtent}, Point2{0.6 * kExtent, -kExtent}, kHw);
  return RoadMap(std::move(s));
}

inline ScenarioSpec grid_city_spec(std::optional<std::size_t> trim_degree = std::nullopt) {
  ScenarioSpec spec;
  spec.name = "grid_city";
  spec.map = grid_city_map();
  spec.sample = ScenarioSpec::Sample{50, 464, 0.7};
  spec.radius = 3000.0;
  spec.trim_degree = trim_degree;
  if (trim_degree) spec.name += "_trim" + std::to_string(*trim_degree);
  return spec;
}

/// One long straight road; the along-road component of the common error is
/// unobservable there.
inline ScenarioSpec straight_road_spec() {
  ScenarioSpec spec;
  spec.name = "straight_road";
  spec.map = RoadMap({RoadSegment({0.0, 0.0}, {5000.0, 0.0}, 2.0)});
  spec.poses = {{{800.0, 0.5}, 0.0}, {{1900.0, -0.8}, 0.0}, {{3100.0, 0.2}, 0.0}, {{4200.0, -0.3}, 0.0}};
  spec.radius = 3000.0;
  return spec;
}

/// Built-in name or path to a scenario file.
inline ScenarioSpec resolve_scenario(const std::string& name_or_path) {
  if (name_or_path == "four_vehicle") return four_vehicle_spec();
  if (name_or_path == "grid_city") return grid_city_spec();
  if (name_or_path == "grid_city_75") return grid_city_spec(20);
  if (name_or_path == "grid_city_50") return grid_city_spec(14);
  if (name_or_path == "straight_road") return straight_road_spec();
  return load_scenario_file(name_or_path);
}

}  // namespace cmm
