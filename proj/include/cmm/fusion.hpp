#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "cmm/consensus.hpp"
#include "cmm/particle_filter.hpp"
#include "cmm/rng.hpp"
#include "cmm/roadmap.hpp"

namespace cmm {

/// Checks a single fusion row: entries in [0,1], self present, sum 1.
inline void validate_row(const WeightRow& row, NodeId self, double tol = 1e-9) {
  if (!row.contains(self)) throw std::invalid_argument("fusion row must contain the node itself");
  double sum = 0.0;
  for (auto [j, a] : row) {
    if (!(a >= 0.0 && a <= 1.0)) throw std::invalid_argument("fusion weight outside [0,1]");
    sum += a;
  }
  if (std::abs(sum - 1.0) > tol) throw std::invalid_argument("fusion row does not sum to 1");
}

/// Splits `capacity` particles over the row's sources by largest remainder.
/// Remainders equal within 1e-9 go to the smaller node id.
inline std::map<NodeId, std::size_t> counts_from_weights(const WeightRow& row, std::size_t capacity) {
  if (capacity == 0) throw std::invalid_argument("capacity must be positive");
  double sum = 0.0;
  for (auto [j, a] : row) {
    if (!(a >= 0.0)) throw std::invalid_argument("negative fusion weight");
    sum += a;
  }
  if (!(sum > 0.0)) throw std::invalid_argument("fusion row has no mass");

  struct Share {
    NodeId id;
    std::size_t count;
    double remainder;
  };
  std::vector<Share> shares;
  std::size_t assigned = 0;
  for (auto [j, a] : row) {
    const double exact = a / sum * static_cast<double>(capacity);
    auto whole = static_cast<std::size_t>(std::floor(exact + 1e-9));
    whole = std::min(whole, capacity);
    shares.push_back({j, whole, exact - static_cast<double>(whole)});
    assigned += whole;
  }
  std::vector<std::size_t> order(shares.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
    if (std::abs(shares[l].remainder - shares[r].remainder) > 1e-9) return shares[l].remainder > shares[r].remainder;
    return shares[l].id < shares[r].id;
  });
  for (std::size_t k = 0; assigned < capacity; k = (k + 1) % order.size()) {
    ++shares[order[k]].count;
    ++assigned;
  }
  // Rounding can only overshoot by float slop on the floor; trim the smallest remainders.
  for (std::size_t k = order.size(); assigned > capacity && k-- > 0;) {
    if (shares[order[k]].count > 0) {
      --shares[order[k]].count;
      --assigned;
    }
  }
  std::map<NodeId, std::size_t> out;
  for (const auto& s : shares) out[s.id] = s.count;
  return out;
}

/// Snapshot exchanged at the round barrier.
using SnapshotMap = std::map<NodeId, const ParticleSet*>;

struct FuseOutcome {
  ParticleSet particles;
  std::map<NodeId, std::size_t> counts;  // particles taken from each source
  bool shortfall = false;                // a source snapshot was missing
  bool degenerate = false;               // map matching killed every particle
};

/// Stacks particles drawn from the node's own set and its neighbors'
/// snapshots in proportion to `row`, map-matches the stack against the local
/// measurement group and resamples back to capacity.
inline FuseOutcome fuse(NodeId self, const ParticleSet& own, const SnapshotMap& neighbor_sets, const WeightRow& row,
                        const RoadMap& map, std::span<const GnssMeasurement> measurements, double softness,
                        std::uint64_t seed) {
  FuseOutcome out;
  WeightRow available;
  for (auto [j, a] : row) {
    if (j == self || (neighbor_sets.contains(j) && neighbor_sets.at(j) != nullptr)) {
      available[j] = a;
    } else if (a > 0.0) {
      out.shortfall = true;
    }
  }
  if (!available.contains(self)) available[self] = 0.0;
  double mass = 0.0;
  for (auto [j, a] : available) mass += a;
  if (mass <= 0.0) {
    available = {{self, 1.0}};
  } else {
    for (auto& [j, a] : available) a /= mass;
  }

  out.counts = counts_from_weights(available, own.capacity());
  Rng rng = make_rng({seed, tag(Stream::kFuse)});
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Particle> stacked;
  stacked.reserve(own.capacity());
  for (auto [j, count] : out.counts) {
    const double u = unit(rng);
    if (count == 0) continue;
    const ParticleSet& src = j == self ? own : *neighbor_sets.at(j);
    std::vector<double> w;
    w.reserve(src.size());
    for (const auto& p : src.particles()) w.push_back(p.weight);
    for (auto k : systematic_indices(w, count, u)) stacked.push_back({src[k].hypothesis, 1.0});
  }
  ParticleSet pool(std::move(stacked), own.capacity());
  pool.set_uniform_weights();

  try {
    pool = update(std::move(pool), measurements, map, softness);
  } catch (const DegenerateWeights&) {
    out.degenerate = true;
    pool.set_uniform_weights();
  }
  out.particles = resample(pool, seed_hash({seed, tag(Stream::kResample)}));
  return out;
}

/// One step of the linear surrogate x_i <- sum_j a_ij x_j + w_i, with
/// w_i ~ N(0, noise_sigma^2) per axis.
inline std::vector<CommonError> linear_surrogate_step(std::span<const CommonError> estimates,
                                                      const ConsensusMatrix& weights, double noise_sigma,
                                                      std::uint64_t seed) {
  if (weights.size() != estimates.size()) throw std::invalid_argument("weights do not match estimate count");
  if (noise_sigma < 0.0) throw std::invalid_argument("noise sigma must be non-negative");
  const std::size_t n = estimates.size();
  std::vector<CommonError> next(n);
  Rng rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  for (NodeId i = 0; i < n; ++i) {
    Vec2 acc;
    for (NodeId j = 0; j < n; ++j) acc += weights(i, j) * estimates[j].offset;
    if (noise_sigma > 0.0) acc += Vec2{noise_sigma * n01(rng), noise_sigma * n01(rng)};
    next[i].offset = acc;
  }
  return next;
}

}  // namespace cmm
