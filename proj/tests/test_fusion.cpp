#include <gtest/gtest.h>

#include <cmath>

#include "cmm/fusion.hpp"
#include "cmm/scenario.hpp"

using namespace cmm;

namespace {

// A corridor so wide that every corrected position is on the road.
RoadMap flat_map() { return RoadMap({RoadSegment({-1e6, 0}, {1e6, 0}, 1e6)}); }

ParticleSet cloud(std::size_t n, Vec2 center, double sigma, std::uint64_t seed) {
  Rng rng(seed);
  return ParticleSet::gaussian(n, {center}, sigma, rng);
}

const std::vector<GnssMeasurement> kOrigin{{{0, 0}, 0}};

}  // namespace

TEST(Counts, ClosedForms) {
  EXPECT_EQ(counts_from_weights({{0, 1.0}}, 500), (std::map<NodeId, std::size_t>{{0, 500}}));
  EXPECT_EQ(counts_from_weights({{0, 0.5}, {1, 0.5}}, 500), (std::map<NodeId, std::size_t>{{0, 250}, {1, 250}}));
}

TEST(Counts, LargestRemainderTieGoesToSmallerId) {
  EXPECT_EQ(counts_from_weights({{0, 0.4}, {1, 0.35}, {2, 0.25}}, 10),
            (std::map<NodeId, std::size_t>{{0, 4}, {1, 4}, {2, 2}}));
  EXPECT_EQ(counts_from_weights({{5, 0.4}, {1, 0.35}, {2, 0.25}}, 10),
            (std::map<NodeId, std::size_t>{{1, 4}, {2, 2}, {5, 4}}));
  EXPECT_EQ(counts_from_weights({{3, 0.4}, {1, 0.25}, {2, 0.35}}, 10),
            (std::map<NodeId, std::size_t>{{1, 3}, {2, 3}, {3, 4}}));
}

TEST(Counts, AlwaysSumToCapacity) {
  Rng rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  for (int k = 0; k < 500; ++k) {
    WeightRow row;
    const int n = 1 + k % 7;
    for (int j = 0; j < n; ++j) row[j] = u(rng);
    const std::size_t cap = 1 + k % 613;
    std::size_t total = 0;
    for (auto [j, c] : counts_from_weights(row, cap)) {
      total += c;
      EXPECT_LE(std::abs(static_cast<double>(c) - row[j] * cap / [&] {
        double s = 0;
        for (auto [i, a] : row) s += a;
        return s;
      }()), 1.0 + 1e-9);
    }
    EXPECT_EQ(total, cap);
  }
}

TEST(Counts, RejectsBadRows) {
  EXPECT_THROW(counts_from_weights({{0, -0.1}, {1, 1.1}}, 10), std::invalid_argument);
  EXPECT_THROW(counts_from_weights({{0, 0.0}}, 10), std::invalid_argument);
  EXPECT_THROW(counts_from_weights({{0, 1.0}}, 0), std::invalid_argument);
  EXPECT_THROW(validate_row({{1, 1.0}}, 0), std::invalid_argument);
  EXPECT_THROW(validate_row({{0, 0.6}, {1, 0.6}}, 0), std::invalid_argument);
  EXPECT_NO_THROW(validate_row({{0, 0.4}, {1, 0.6}}, 0));
}

TEST(Fuse, SelfOnlyRowIsUpdatePlusResample) {
  const Scenario sc = build_scenario(four_vehicle_spec());
  const auto own = cloud(200, {1, 1}, 2.0, 3);
  const std::vector<GnssMeasurement> z{simulate_gnss(sc.poses[0], {{1, 1}}, 0.5, 1, 0),
                                       simulate_gnss(sc.poses[1], {{1, 1}}, 0.5, 2, 1)};
  const auto out = fuse(0, own, {}, {{0, 1.0}}, sc.map, z, 0.5, 77);
  const auto ref = resample(update(own, z, sc.map, 0.5), seed_hash({77, tag(Stream::kResample)}));
  // Equal-weight systematic draw of the whole set keeps every particle once.
  ASSERT_EQ(out.particles.size(), ref.size());
  EXPECT_NEAR(estimate(out.particles).offset.x, estimate(ref).offset.x, 1e-12);
  EXPECT_NEAR(estimate(out.particles).offset.y, estimate(ref).offset.y, 1e-12);
  EXPECT_EQ(out.counts.at(0), 200u);
  EXPECT_FALSE(out.shortfall);
}

TEST(Fuse, IdenticalSetsGiveSameEstimate) {
  const std::size_t m = 500;
  const double spread = 1.0;
  const auto a = cloud(m, {2, -1}, spread, 5);
  const SnapshotMap nb{{1, &a}};
  const auto out = fuse(0, a, nb, {{0, 0.3}, {1, 0.7}}, flat_map(), kOrigin, 0.5, 9);
  EXPECT_NEAR(estimate(out.particles).offset.x, estimate(a).offset.x, 3 * spread / std::sqrt(m));
  EXPECT_NEAR(estimate(out.particles).offset.y, estimate(a).offset.y, 3 * spread / std::sqrt(m));
}

TEST(Fuse, FlatLikelihoodGivesMixtureMean) {
  const std::size_t m = 500;
  const double spread = 0.3;
  const auto a = cloud(m, {0, 0}, spread, 5);
  const auto b = cloud(m, {2, 0}, spread, 6);
  const SnapshotMap nb{{1, &b}};
  const auto out = fuse(0, a, nb, {{0, 0.5}, {1, 0.5}}, flat_map(), kOrigin, 0.5, 9);
  EXPECT_EQ(out.counts.at(0), 250u);
  EXPECT_EQ(out.counts.at(1), 250u);
  EXPECT_NEAR(estimate(out.particles).offset.x, 1.0, 3 * spread / std::sqrt(m));
  EXPECT_NEAR(estimate(out.particles).offset.y, 0.0, 3 * spread / std::sqrt(m));
}

TEST(Fuse, MissingSnapshotRenormalizes) {
  const auto a = cloud(100, {0, 0}, 0.3, 5);
  const auto b = cloud(100, {5, 0}, 0.3, 6);
  const SnapshotMap nb{{1, &b}};
  const auto out = fuse(0, a, nb, {{0, 0.5}, {1, 0.25}, {2, 0.25}}, flat_map(), kOrigin, 0.5, 1);
  EXPECT_TRUE(out.shortfall);
  EXPECT_EQ(out.counts.at(0), 67u);
  EXPECT_EQ(out.counts.at(1), 33u);
  EXPECT_EQ(out.counts.count(2), 0u);
  EXPECT_EQ(out.particles.size(), 100u);
}

TEST(Fuse, Deterministic) {
  const auto a = cloud(100, {0, 0}, 1, 5);
  const auto b = cloud(100, {1, 0}, 1, 6);
  const SnapshotMap nb{{1, &b}};
  const auto x = fuse(0, a, nb, {{0, 0.5}, {1, 0.5}}, flat_map(), kOrigin, 0.5, 31);
  const auto y = fuse(0, a, nb, {{0, 0.5}, {1, 0.5}}, flat_map(), kOrigin, 0.5, 31);
  for (std::size_t k = 0; k < x.particles.size(); ++k)
    EXPECT_EQ(x.particles[k].hypothesis.offset.x, y.particles[k].hypothesis.offset.x);
}

TEST(Surrogate, ClosedForms) {
  const std::vector<CommonError> x{{{1, 0}}, {{0, 0}}, {{0, 0}}, {{0, 0}}};
  const auto ring = ConnectionMatrix::from_rows(*four_vehicle_spec().connection_matrix);
  const auto y = linear_surrogate_step(x, constant_alpha_weights(ring, 0.5), 0.0, 1);
  EXPECT_DOUBLE_EQ(y[0].offset.x, 0.5);
  EXPECT_DOUBLE_EQ(y[1].offset.x, 0.0);
  EXPECT_DOUBLE_EQ(y[2].offset.x, 0.0);
  EXPECT_DOUBLE_EQ(y[3].offset.x, 0.5);

  const auto same = linear_surrogate_step(x, ConsensusMatrix::identity(4), 0.0, 1);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(same[i].offset.x, x[i].offset.x);

  const auto avg = linear_surrogate_step(x, ConsensusMatrix(Eigen::MatrixXd::Constant(4, 4, 0.25)), 0.0, 1);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(avg[i].offset.x, 0.25);
}
