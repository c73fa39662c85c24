#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "cmm/geometry.hpp"
#include "cmm/rng.hpp"
#include "cmm/roadmap.hpp"
#include "cmm/vehicle_net.hpp"

namespace cmm {

/// Shared (atmospheric) GNSS error, east/north meters.
struct CommonError {
  Vec2 offset;

  friend bool operator==(const CommonError&, const CommonError&) = default;
};

struct Particle {
  CommonError hypothesis;
  double weight = 0.0;
};

struct GnssMeasurement {
  Point2 measured_position;
  NodeId owner = 0;
};

/// Raised when no particle keeps a representable weight.
class DegenerateWeights : public std::runtime_error {
 public:
  DegenerateWeights() : std::runtime_error("all particle weights vanished") {}
};

/// Weighted hypotheses of the common error. `capacity` is the population
/// size restored by every resampling.
class ParticleSet {
 public:
  ParticleSet() = default;
  ParticleSet(std::vector<Particle> particles, std::size_t capacity)
      : particles_(std::move(particles)), capacity_(capacity) {
    if (capacity_ == 0) throw std::invalid_argument("particle set capacity must be positive");
  }

  /// capacity draws from N(center, sigma^2 I), equal weights.
  static ParticleSet gaussian(std::size_t capacity, CommonError center, double sigma, Rng& rng) {
    std::normal_distribution<double> n01(0.0, 1.0);
    std::vector<Particle> ps(capacity);
    for (auto& p : ps) {
      p.hypothesis.offset = center.offset + Vec2{sigma * n01(rng), sigma * n01(rng)};
      p.weight = 1.0 / static_cast<double>(capacity);
    }
    return ParticleSet(std::move(ps), capacity);
  }

  std::size_t size() const { return particles_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return particles_.empty(); }

  std::vector<Particle>& particles() { return particles_; }
  const std::vector<Particle>& particles() const { return particles_; }
  const Particle& operator[](std::size_t k) const { return particles_[k]; }

  double total_weight() const {
    double s = 0.0;
    for (const auto& p : particles_) s += p.weight;
    return s;
  }

  void normalize() {
    const double s = total_weight();
    if (!(s > 0.0) || !std::isfinite(s)) throw DegenerateWeights();
    for (auto& p : particles_) p.weight /= s;
  }

  void set_uniform_weights() {
    const double w = 1.0 / static_cast<double>(particles_.size());
    for (auto& p : particles_) p.weight = w;
  }

 private:
  std::vector<Particle> particles_;
  std::size_t capacity_ = 1;
};

/// Adds i.i.d. N(0, diffusion_sigma^2) to both axes of every hypothesis.
inline ParticleSet predict(ParticleSet set, double diffusion_sigma, std::uint64_t seed) {
  if (diffusion_sigma < 0.0) throw std::invalid_argument("diffusion sigma must be non-negative");
  if (diffusion_sigma == 0.0) return set;
  Rng rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  for (auto& p : set.particles()) {
    p.hypothesis.offset.x += diffusion_sigma * n01(rng);
    p.hypothesis.offset.y += diffusion_sigma * n01(rng);
  }
  return set;
}

/// Map-matching update. Each particle's weight is multiplied by the road
/// likelihood of every corrected position (measurement minus hypothesis),
/// then the set is renormalized. Works in the log domain; throws
/// DegenerateWeights when every updated weight underflows a double.
inline ParticleSet update(ParticleSet set, std::span<const GnssMeasurement> measurements, const RoadMap& map,
                          double softness) {
  if (measurements.empty()) throw std::invalid_argument("update needs at least one measurement");
  if (softness < 0.0) throw std::invalid_argument("softness must be non-negative");
  auto& ps = set.particles();
  if (ps.empty()) throw std::invalid_argument("update on an empty particle set");

  Box2 hyp_box;
  for (const auto& p : ps) hyp_box.expand(p.hypothesis.offset);

  std::vector<double> logw(ps.size());
  for (std::size_t k = 0; k < ps.size(); ++k) {
    logw[k] = ps[k].weight > 0.0 ? std::log(ps[k].weight) : -std::numeric_limits<double>::infinity();
  }
  for (const auto& m : measurements) {
    const Box2 corrected{m.measured_position - hyp_box.hi, m.measured_position - hyp_box.lo};
    const auto subset = map.candidates(corrected);
    for (std::size_t k = 0; k < ps.size(); ++k) {
      const double d = map.boundary_distance(m.measured_position - ps[k].hypothesis.offset, subset);
      logw[k] += detail::log_likelihood_from_distance(d, softness);
    }
  }

  const double top = *std::max_element(logw.begin(), logw.end());
  if (!(top >= std::log(std::numeric_limits<double>::min()))) throw DegenerateWeights();
  double sum = 0.0;
  for (std::size_t k = 0; k < ps.size(); ++k) {
    ps[k].weight = std::exp(logw[k] - top);
    sum += ps[k].weight;
  }
  for (auto& p : ps) p.weight /= sum;
  return set;
}

/// Systematic selection of `count` indices from (unnormalized) weights with a
/// single offset u in [0, 1). Index k is chosen floor or ceil of
/// count * w_k / sum(w) times.
inline std::vector<std::size_t> systematic_indices(std::span<const double> weights, std::size_t count, double u) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0) || !std::isfinite(total)) throw DegenerateWeights();
  std::vector<std::size_t> out;
  out.reserve(count);
  if (count == 0) return out;
  const double step = total / static_cast<double>(count);
  double target = u * step;
  double cumulative = weights[0];
  std::size_t k = 0;
  for (std::size_t m = 0; m < count; ++m) {
    while (target >= cumulative && k + 1 < weights.size()) cumulative += weights[++k];
    out.push_back(k);
    target += step;
  }
  return out;
}

/// Systematic resampling back to capacity with equal weights.
inline ParticleSet resample(const ParticleSet& set, std::uint64_t seed) {
  if (set.empty()) throw DegenerateWeights();
  std::vector<double> w;
  w.reserve(set.size());
  for (const auto& p : set.particles()) w.push_back(p.weight);
  Rng rng(seed);
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  const auto picks = systematic_indices(w, set.capacity(), u);
  const double uniform = 1.0 / static_cast<double>(set.capacity());
  std::vector<Particle> out;
  out.reserve(picks.size());
  for (auto k : picks) out.push_back({set[k].hypothesis, uniform});
  return ParticleSet(std::move(out), set.capacity());
}

/// Weighted mean of the hypotheses.
inline CommonError estimate(const ParticleSet& set) {
  if (set.empty()) throw std::invalid_argument("estimate of an empty particle set");
  Vec2 acc;
  double total = 0.0;
  for (const auto& p : set.particles()) {
    acc += p.weight * p.hypothesis.offset;
    total += p.weight;
  }
  if (!(total > 0.0)) throw DegenerateWeights();
  return {(1.0 / total) * acc};
}

/// Measurement = true position + common error + N(0, noise_sigma^2) per axis.
inline GnssMeasurement simulate_gnss(const VehiclePose& true_pose, CommonError common_error, double noise_sigma,
                                     std::uint64_t seed, NodeId owner = 0) {
  if (noise_sigma < 0.0) throw std::invalid_argument("noise sigma must be non-negative");
  GnssMeasurement m{true_pose.position + common_error.offset, owner};
  if (noise_sigma > 0.0) {
    Rng rng(seed);
    std::normal_distribution<double> n01(0.0, 1.0);
    m.measured_position.x += noise_sigma * n01(rng);
    m.measured_position.y += noise_sigma * n01(rng);
  }
  return m;
}

/// Debug dump, one `node t hyp_x hyp_y weight` row per particle.
inline void dump_particles(std::ostream& out, NodeId node, std::size_t t, const ParticleSet& set) {
  for (const auto& p : set.particles()) {
    out << node << ' ' << t << ' ' << p.hypothesis.offset.x << ' ' << p.hypothesis.offset.y << ' ' << p.weight
        << '\n';
  }
}

}  // namespace cmm
