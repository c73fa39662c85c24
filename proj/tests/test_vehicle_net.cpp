#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cmm/scenario.hpp"
#include "cmm/vehicle_net.hpp"
#include "oracles.hpp"

using namespace cmm;

namespace {

std::vector<VehiclePose> at_x(std::initializer_list<double> xs) {
  std::vector<VehiclePose> p;
  for (double x : xs) p.push_back({{x, 0.0}, 0.0});
  return p;
}

VehicleNetwork path(std::size_t n) {
  VehicleNetwork net{std::vector<VehiclePose>(n)};
  for (NodeId i = 0; i + 1 < n; ++i) net.add_edge(i, i + 1);
  return net;
}

VehicleNetwork star(std::size_t leaves) {
  VehicleNetwork net{std::vector<VehiclePose>(leaves + 1)};
  for (NodeId i = 1; i <= leaves; ++i) net.add_edge(0, i);
  return net;
}

}  // namespace

TEST(RadiusGraph, BoundaryIsInclusive) {
  EXPECT_EQ(radius_graph(at_x({0, 2999}), 3000).edge_count(), 1u);
  EXPECT_EQ(radius_graph(at_x({0, 3000}), 3000).edge_count(), 1u);
  EXPECT_EQ(radius_graph(at_x({0, 3001}), 3000).edge_count(), 0u);
}

TEST(RadiusGraph, DegenerateInputs) {
  EXPECT_EQ(radius_graph({}, 10).size(), 0u);
  const auto one = radius_graph(at_x({5}), 10);
  EXPECT_EQ(one.size(), 1u);
  EXPECT_EQ(one.edge_count(), 0u);
  EXPECT_THROW(radius_graph(at_x({0, 1}), 0.0), std::invalid_argument);
}

TEST(RadiusGraph, NoSelfLoopsAndSymmetric) {
  const Scenario sc = build_scenario(grid_city_spec());
  for (NodeId i = 0; i < sc.size(); ++i) {
    EXPECT_FALSE(sc.network.has_edge(i, i));
    for (auto j : sc.network.neighbors(i)) EXPECT_TRUE(sc.network.has_edge(j, i));
  }
  VehicleNetwork net{std::vector<VehiclePose>(2)};
  EXPECT_THROW(net.add_edge(1, 1), std::invalid_argument);
}

TEST(RadiusGraph, DenseCityIsWellConnected) {
  // Most vehicles hear more than 14 others at a 3 km radius.
  const Scenario sc = build_scenario(grid_city_spec());
  std::vector<std::size_t> deg;
  for (NodeId i = 0; i < sc.size(); ++i) deg.push_back(sc.network.degree(i));
  std::nth_element(deg.begin(), deg.begin() + deg.size() / 2, deg.end());
  EXPECT_GT(deg[deg.size() / 2], 14u);
  const auto hist = degree_histogram(sc.network);
  EXPECT_EQ(std::accumulate(hist.begin(), hist.end(), std::size_t{0}), 50u);
}

TEST(Trim, StarLosesCenter) {
  const auto r = trim_by_degree(star(5), 4);
  EXPECT_EQ(r.network.size(), 5u);
  EXPECT_EQ(r.network.edge_count(), 0u);
  EXPECT_EQ(r.kept, (std::vector<NodeId>{1, 2, 3, 4, 5}));
}

TEST(Trim, KeepsSurvivorEdges) {
  const auto r = trim_by_degree(path(4), 2);
  EXPECT_EQ(r.network.size(), 4u);
  EXPECT_EQ(r.network.edge_count(), 3u);
  const auto r1 = trim_by_degree(path(4), 1);
  EXPECT_EQ(r1.kept, (std::vector<NodeId>{0, 3}));
  EXPECT_EQ(r1.network.edge_count(), 0u);
}

TEST(Trim, CityPenetrationLevels) {
  EXPECT_EQ(build_scenario(grid_city_spec()).size(), 50u);
  EXPECT_EQ(build_scenario(grid_city_spec(20)).size(), 38u);
  EXPECT_EQ(build_scenario(grid_city_spec(14)).size(), 24u);
}

TEST(Connectivity, SmallCases) {
  EXPECT_TRUE(is_connected(VehicleNetwork(std::vector<VehiclePose>(1))));
  EXPECT_FALSE(is_connected(VehicleNetwork(std::vector<VehiclePose>(2))));
  EXPECT_THROW(is_connected(VehicleNetwork{}), std::invalid_argument);
  const auto ring = ConnectionMatrix::from_rows(*four_vehicle_spec().connection_matrix);
  EXPECT_FALSE(ring.symmetric());
  EXPECT_TRUE(is_connected(ring.symmetrized(std::vector<VehiclePose>(4))));
  EXPECT_EQ(component_count(VehicleNetwork(std::vector<VehiclePose>(3))), 3u);
}

TEST(Diameter, ClosedForms) {
  VehicleNetwork k4(std::vector<VehiclePose>(4));
  for (NodeId i = 0; i < 4; ++i)
    for (NodeId j = i + 1; j < 4; ++j) k4.add_edge(i, j);
  EXPECT_EQ(network_diameter(k4), 1u);
  EXPECT_EQ(network_diameter(path(5)), 4u);
  auto cycle = path(4);
  cycle.add_edge(3, 0);
  EXPECT_EQ(network_diameter(cycle), 2u);
  EXPECT_FALSE(network_diameter(VehicleNetwork(std::vector<VehiclePose>(2))).has_value());
}

TEST(Diameter, MatchesFloydWarshall) {
  for (auto trim : {std::optional<std::size_t>{}, std::optional<std::size_t>{20}, std::optional<std::size_t>{14}}) {
    const Scenario sc = build_scenario(grid_city_spec(trim));
    const auto d = oracle::all_pairs_hops(sc.network);
    double worst = 0.0;
    for (const auto& row : d)
      for (double v : row) worst = std::max(worst, v);
    ASSERT_TRUE(std::isfinite(worst));
    EXPECT_EQ(network_diameter(sc.network), static_cast<std::size_t>(worst));
    for (NodeId s = 0; s < sc.size(); ++s) {
      const auto hops = hop_distances(sc.network, s);
      for (NodeId t = 0; t < sc.size(); ++t) EXPECT_EQ(static_cast<double>(*hops[t]), d[s][t]);
    }
  }
}

TEST(SamplePoses, SingleSegment) {
  const RoadMap m({RoadSegment({0, 0}, {100, 0}, 2.0)});
  const auto p = sample_poses(m, 1, 9, 0.5);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_TRUE(point_on_road(m, p[0].position));
  EXPECT_DOUBLE_EQ(p[0].road_angle, 0.0);
}

TEST(SamplePoses, DeterministicAndOnRoad) {
  const RoadMap m = grid_city_map();
  const auto a = sample_poses(m, 50, 464, 0.7);
  const auto b = sample_poses(m, 50, 464, 0.7);
  ASSERT_EQ(a.size(), 50u);
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].position.x, b[k].position.x);
    EXPECT_EQ(a[k].position.y, b[k].position.y);
    EXPECT_TRUE(point_on_road(m, a[k].position));
  }
  const auto c = sample_poses(m, 50, 465, 0.7);
  EXPECT_NE(a[0].position.x, c[0].position.x);
}

TEST(ConnectionMatrix, RowsAndSources) {
  const auto c = ConnectionMatrix::from_rows(*four_vehicle_spec().connection_matrix);
  EXPECT_EQ(c.sources(0), (std::vector<NodeId>{1}));
  EXPECT_EQ(c.sources(3), (std::vector<NodeId>{0}));
  EXPECT_THROW(ConnectionMatrix::from_rows({{1, 0}, {0}}), std::invalid_argument);
  EXPECT_THROW(ConnectionMatrix::from_rows({{0, 1}, {1, 1}}), std::invalid_argument);
}
