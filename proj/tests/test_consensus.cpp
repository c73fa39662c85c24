#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cmm/consensus.hpp"
#include "cmm/scenario.hpp"
#include "oracles.hpp"

using namespace cmm;

namespace {

ConnectionMatrix undirected(std::size_t n, std::initializer_list<std::pair<NodeId, NodeId>> edges) {
  VehicleNetwork net{std::vector<VehiclePose>(n)};
  for (auto [i, j] : edges) net.add_edge(i, j);
  return ConnectionMatrix::from_network(net);
}

VarianceMinOptions with_floor(double f) {
  VarianceMinOptions o;
  o.floor = f;
  return o;
}

ConnectionMatrix ring_support() { return ConnectionMatrix::from_rows(*four_vehicle_spec().connection_matrix); }

std::vector<CommonError> on_x(std::initializer_list<double> xs) {
  std::vector<CommonError> out;
  for (double x : xs) out.push_back({{x, 0.0}});
  return out;
}

}  // namespace

TEST(MaxDegree, FourCycle) {
  const auto a = max_degree_weights(undirected(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}}));
  for (NodeId i = 0; i < 4; ++i) {
    EXPECT_EQ(a(i, i), 0.0);
    EXPECT_EQ(a(i, (i + 1) % 4), 0.5);
    EXPECT_EQ(a(i, (i + 3) % 4), 0.5);
    EXPECT_EQ(a(i, (i + 2) % 4), 0.0);
  }
}

TEST(MaxDegree, Star) {
  const auto a = max_degree_weights(undirected(4, {{0, 1}, {0, 2}, {0, 3}}));
  EXPECT_EQ(a(0, 0), 0.0);
  for (NodeId j = 1; j < 4; ++j) {
    EXPECT_EQ(a(0, j), 1.0 / 3.0);
    EXPECT_EQ(a(j, 0), 1.0 / 3.0);
    EXPECT_EQ(a(j, j), 1.0 - 1.0 / 3.0);
  }
}

TEST(MaxDegree, EdgelessIsIdentityAndRingMatchesHalf) {
  const auto e = max_degree_weights(ConnectionMatrix(3));
  EXPECT_TRUE(e.matrix().isIdentity());
  const auto ring = ring_support();
  EXPECT_EQ(max_degree_weights(ring).matrix(), constant_alpha_weights(ring, 0.5).matrix());
  EXPECT_FALSE(max_degree_weights(ring).violation(ring).has_value());
}

TEST(ConstantAlpha, RingForms) {
  const auto ring = ring_support();
  const auto a = constant_alpha_weights(ring, 0.5);
  Eigen::Matrix4d expected;
  expected << 0.5, 0.5, 0, 0, 0, 0.5, 0.5, 0, 0, 0, 0.5, 0.5, 0.5, 0, 0, 0.5;
  EXPECT_EQ(a.matrix(), Eigen::MatrixXd(expected));
  EXPECT_TRUE(constant_alpha_weights(ring, 1.0).matrix().isIdentity());
  const auto z = constant_alpha_weights(ring, 0.0);
  for (NodeId i = 0; i < 4; ++i) EXPECT_EQ(z(i, (i + 1) % 4), 1.0);
  const auto iso = constant_alpha_weights(ConnectionMatrix(2), 0.3);
  EXPECT_TRUE(iso.matrix().isIdentity());
  EXPECT_THROW(constant_alpha_weights(ring, 1.5), std::invalid_argument);
}

TEST(RandomWeights, StochasticDeterministicAndSupported) {
  const Scenario sc = build_scenario(grid_city_spec(14));
  const auto a = random_weights(sc.support, 11), b = random_weights(sc.support, 11), c = random_weights(sc.support, 12);
  EXPECT_FALSE(a.violation(sc.support).has_value());
  EXPECT_EQ(a.matrix(), b.matrix());
  EXPECT_NE(a.matrix(), c.matrix());
  EXPECT_EQ(random_weights(ConnectionMatrix(1), 3)(0, 0), 1.0);
}

TEST(Violation, DetectsBrokenMatrices) {
  const auto ring = ring_support();
  Eigen::MatrixXd m = constant_alpha_weights(ring, 0.5).matrix();
  m(0, 2) = 0.1;
  m(0, 0) = 0.4;
  EXPECT_TRUE(ConsensusMatrix(m).violation(ring).has_value());
  m = constant_alpha_weights(ring, 0.5).matrix();
  m(1, 1) = 0.6;
  EXPECT_TRUE(ConsensusMatrix(m).violation(ring).has_value());
}

TEST(Projection, OntoFlooredSimplex) {
  const auto p = project_row({0.2, 0.2, 0.2}, 0, 0.0);
  for (double v : p) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  const auto q = project_row({-1.0, 2.0, 0.0}, 0, 0.3);
  EXPECT_NEAR(q[0], 0.3, 1e-15);
  EXPECT_NEAR(q[1], 0.7, 1e-15);
  EXPECT_NEAR(q[2], 0.0, 1e-15);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n01;
  for (int k = 0; k < 200; ++k) {
    std::vector<double> v(5);
    for (auto& e : v) e = n01(rng);
    const auto r = project_row(v, 2, 0.1);
    double s = 0;
    for (double e : r) {
      s += e;
      EXPECT_GE(e, 0.0);
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
    EXPECT_GE(r[2], 0.1 - 1e-12);
  }
}

TEST(VarianceMin, EqualEstimatesReturnInitialization) {
  const auto ring = ring_support();
  const auto r = variance_min_weights(on_x({2, 2, 2, 2}), ring);
  EXPECT_EQ(r.weights.matrix(), max_degree_weights(ring).matrix());
  EXPECT_EQ(r.objective, 0.0);
}

TEST(VarianceMin, PathMatchesGridOracle) {
  const auto path = undirected(3, {{0, 1}, {1, 2}});
  const auto opt = with_floor(0.0);
  const auto r = variance_min_weights(on_x({0, 1, 2}), path, opt);
  const double grid = oracle::qp_grid_minimum({Vec2{0, 0}, Vec2{1, 0}, Vec2{2, 0}}, path, 0.0);
  EXPECT_NEAR(r.objective, grid, 1e-4);
  EXPECT_NEAR(r.objective, variance_objective(r.weights.matrix(), on_x({0, 1, 2})), 1e-12);
  EXPECT_FALSE(r.weights.violation(path).has_value());
}

TEST(VarianceMin, CompleteGraphReachesZero) {
  const auto k5 = undirected(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}, {1, 2}, {1, 3}, {1, 4}, {2, 3}, {2, 4}, {3, 4}});
  const std::vector<CommonError> x{{{0, 1}}, {{3, -2}}, {{1, 1}}, {{-2, 0.5}}, {{0.3, 4}}};
  const auto r = variance_min_weights(x, k5, with_floor(0.0));
  EXPECT_LT(r.objective, 1e-8);
}

TEST(VarianceMin, FloorIsRespected) {
  const Scenario sc = build_scenario(grid_city_spec(14));
  std::vector<CommonError> x;
  Rng rng(2);
  std::normal_distribution<double> n01;
  for (std::size_t i = 0; i < sc.size(); ++i) x.push_back({{n01(rng), n01(rng)}});
  const auto r = variance_min_weights(x, sc.support, with_floor(0.2));
  EXPECT_FALSE(r.weights.violation(sc.support).has_value());
  for (NodeId i = 0; i < sc.size(); ++i) EXPECT_GE(r.weights(i, i), 0.2 - 1e-12);
  EXPECT_LE(r.objective, variance_objective(max_degree_weights(sc.support).matrix(), x) + 1e-12);
}

TEST(VarianceMin, DistributedTracksCentral) {
  const Scenario sc = build_scenario(grid_city_spec(14));
  std::vector<CommonError> x;
  Rng rng(8);
  std::normal_distribution<double> n01;
  for (std::size_t i = 0; i < sc.size(); ++i) x.push_back({{n01(rng), n01(rng)}});
  const auto central = variance_min_weights(x, sc.support);
  VarianceMinOptions opt;
  opt.distributed_rounds = 2 * *network_diameter(sc.network);
  const auto dist = variance_min_weights(x, sc.support, opt);
  EXPECT_FALSE(dist.weights.violation(sc.support).has_value());
  EXPECT_NEAR(dist.objective, central.objective, 1e-3);
}

TEST(VarianceMin, RejectsNonFinite) {
  EXPECT_THROW(variance_min_weights(on_x({0, NAN}), undirected(2, {{0, 1}})), std::invalid_argument);
  EXPECT_THROW(variance_min_weights(on_x({0, 1}), undirected(2, {{0, 1}}), with_floor(1.0)), std::invalid_argument);
}

TEST(Rate, ClosedForms) {
  EXPECT_EQ(asymptotic_convergence_rate(ConsensusMatrix(Eigen::MatrixXd::Constant(5, 5, 0.2))).rate, 0.0);
  const auto id = asymptotic_convergence_rate(ConsensusMatrix::identity(4));
  EXPECT_EQ(id.rate, 1.0);
  EXPECT_TRUE(id.disconnected);
  const auto c4 = asymptotic_convergence_rate(max_degree_weights(undirected(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}})));
  EXPECT_NEAR(c4.rate, 1.0, 1e-12);
  EXPECT_FALSE(c4.disconnected);
  // Directed ring at alpha = 0.5: eigenvalues 0.5 + 0.5 i^k.
  EXPECT_NEAR(asymptotic_convergence_rate(constant_alpha_weights(ring_support(), 0.5)).rate, std::sqrt(0.5), 1e-12);
}

TEST(Rate, TrajectoryNeverBeatsSpectrum) {
  const auto path = undirected(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}});
  const auto a = random_weights(path, 4);
  const double rate = asymptotic_convergence_rate(a).rate;
  Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(6, -1, 1);
  auto dev = [](const Eigen::VectorXd& v) { return (v.array() - v.mean()).matrix().norm(); };
  for (int t = 0; t < 50; ++t) x = a.matrix() * x;
  const double d50 = dev(x);
  for (int t = 0; t < 100; ++t) x = a.matrix() * x;
  EXPECT_LE(std::pow(dev(x) / d50, 1.0 / 100.0), rate + 1e-3);
}

TEST(Symmetric, PreservesMean) {
  const auto a = max_degree_weights(undirected(5, {{0, 1}, {1, 2}, {2, 3}, {1, 4}}));
  Eigen::VectorXd x(5);
  x << 1, -2, 4, 0.5, 3;
  EXPECT_NEAR((a.matrix() * x).mean(), x.mean(), 1e-15);
}

TEST(Policy, ParseAndName) {
  EXPECT_EQ(WeightPolicy::parse("variance_min").kind, WeightPolicy::Kind::kVarianceMin);
  EXPECT_EQ(WeightPolicy::parse("constant:0.4").alpha, 0.4);
  EXPECT_EQ(WeightPolicy::parse("random:7").seed, 7u);
  EXPECT_EQ(WeightPolicy::parse("random:7").name(), "random:7");
  EXPECT_EQ(WeightPolicy::parse("constant:0.4").name(), "constant:0.4");
  EXPECT_THROW(WeightPolicy::parse("constant:1.2"), std::invalid_argument);
  EXPECT_THROW(WeightPolicy::parse("constant:x"), std::invalid_argument);
  EXPECT_THROW(WeightPolicy::parse("bogus"), std::invalid_argument);
  EXPECT_THROW(static_weights(WeightPolicy::variance_min(), ring_support()), std::invalid_argument);
}
