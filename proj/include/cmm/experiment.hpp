#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "cmm/consensus.hpp"
#include "cmm/fusion.hpp"
#include "cmm/metrics.hpp"
#include "cmm/particle_filter.hpp"
#include "cmm/rng.hpp"
#include "cmm/scenario.hpp"

namespace cmm {

enum class Mode { kCentralized, kDecentralized };

inline Mode parse_mode(const std::string& s) {
  if (s == "centralized") return Mode::kCentralized;
  if (s == "decentralized") return Mode::kDecentralized;
  throw std::invalid_argument("unknown mode: " + s);
}

inline std::string mode_name(Mode m) { return m == Mode::kCentralized ? "centralized" : "decentralized"; }

struct FilterParams {
  std::size_t particles = 500;
  double diffusion_sigma = 0.2;    // per-step prediction noise, m
  double noise_sigma = 1.0;        // non-correlated GNSS noise, m
  double softness = 0.5;           // road constraint fall-off, m
  double init_sigma = 5.0;         // spread of the initial particle cloud, m
  double truth_init_sigma = 2.0;   // spread of the true initial common error, m
  double truth_walk_sigma = 0.01;  // per-step drift of the true common error, m
  double divergence_cap = 50.0;    // per-node error that counts as divergence, m
  double recovery_inflation = 3.0; // diffusion multiplier after degenerate weights

  /// Road-likelihood width with the per-receiver noise folded in.
  double effective_softness() const { return std::sqrt(softness * softness + noise_sigma * noise_sigma); }
};

struct ExperimentConfig {
  WeightPolicy policy = WeightPolicy::variance_min();
  Mode mode = Mode::kDecentralized;
  std::size_t steps = 300;
  std::size_t trials = 3;
  std::uint64_t global_seed = 1;
  FilterParams filter;
  VarianceMinOptions qp;
  bool keep_fusion_log = true;

  void validate() const {
    if (steps < 1) throw std::invalid_argument("steps must be >= 1");
    if (trials < 1) throw std::invalid_argument("trials must be >= 1");
    if (filter.particles < 10) throw std::invalid_argument("need at least 10 particles");
  }
};

struct FusionLogEntry {
  std::size_t t;
  NodeId node;
  NodeId source;
  std::size_t count;
};

struct EventCounts {
  std::size_t degenerate = 0;  // map matching left no usable weight
  std::size_t shortfall = 0;   // a fusion source was missing
  std::size_t diverged = 0;    // node-steps above the divergence cap
};

struct TrialResult {
  std::vector<MetricsRecord> records;
  std::vector<FusionLogEntry> fusion_log;
  std::vector<CommonError> truth;  // c(t) per step
  std::vector<std::vector<CommonError>> estimates;  // per step, per node
  EventCounts events;
};

struct RunResult {
  std::vector<TrialResult> trials;

  /// Mean over trials of the steady-state sqrt(MSE) and sqrt(variance).
  SteadyState steady_state_mean() const {
    SteadyState acc;
    for (const auto& t : trials) {
      const auto s = steady_state(t.records);
      acc.rmse += s.rmse;
      acc.sqrt_variance += s.sqrt_variance;
    }
    acc.rmse /= static_cast<double>(trials.size());
    acc.sqrt_variance /= static_cast<double>(trials.size());
    return acc;
  }

  EventCounts total_events() const {
    EventCounts e;
    for (const auto& t : trials) {
      e.degenerate += t.events.degenerate;
      e.shortfall += t.events.shortfall;
      e.diverged += t.events.diverged;
    }
    return e;
  }
};

namespace detail {

// One filter: its particles plus the pending diffusion boost.
struct FilterState {
  ParticleSet particles;
  bool inflate_next = false;
};

inline std::uint64_t trial_seed(std::uint64_t global_seed, std::size_t trial) { return seed_hash({global_seed, trial}); }

// Predict, map-match against `group` and resample.
inline void local_filter_step(FilterState& f, std::span<const GnssMeasurement> group, const RoadMap& map,
                              const FilterParams& p, std::uint64_t seed, NodeId node, std::size_t t,
                              EventCounts& events) {
  const double sigma = p.diffusion_sigma * (f.inflate_next ? p.recovery_inflation : 1.0);
  f.inflate_next = false;
  ParticleSet s = predict(std::move(f.particles), sigma, seed_hash({seed, node, t, tag(Stream::kPredict)}));
  try {
    s = update(std::move(s), group, map, p.effective_softness());
  } catch (const DegenerateWeights&) {
    ++events.degenerate;
    s.set_uniform_weights();
    f.inflate_next = true;
  }
  f.particles = resample(s, seed_hash({seed, node, t, tag(Stream::kResample)}));
}

inline std::vector<CommonError> truth_path(const FilterParams& p, std::size_t steps, std::uint64_t seed) {
  Rng rng = make_rng({seed, tag(Stream::kTruth)});
  std::normal_distribution<double> n01(0.0, 1.0);
  std::vector<CommonError> c(steps);
  Vec2 cur{p.truth_init_sigma * n01(rng), p.truth_init_sigma * n01(rng)};
  for (auto& e : c) {
    e.offset = cur;
    cur += Vec2{p.truth_walk_sigma * n01(rng), p.truth_walk_sigma * n01(rng)};
  }
  return c;
}

inline std::vector<GnssMeasurement> measure_all(const Scenario& sc, CommonError truth, const FilterParams& p,
                                                std::uint64_t seed, std::size_t t) {
  std::vector<GnssMeasurement> z;
  z.reserve(sc.size());
  for (NodeId i = 0; i < sc.size(); ++i) {
    z.push_back(simulate_gnss(sc.poses[i], truth, p.noise_sigma, seed_hash({seed, i, t, tag(Stream::kGnss)}), i));
  }
  return z;
}

inline FilterState initial_filter(const FilterParams& p, std::uint64_t seed, NodeId node) {
  Rng rng = make_rng({seed, node, tag(Stream::kInit)});
  return {ParticleSet::gaussian(p.particles, CommonError{}, p.init_sigma, rng), false};
}

inline void count_divergence(const MetricsRecord& r, const FilterParams& p, EventCounts& events) {
  for (double e : r.per_node_error) {
    if (e > p.divergence_cap) ++events.diverged;
  }
}

}  // namespace detail

/// One filter fed with every vehicle's measurement.
inline TrialResult run_centralized_trial(const ExperimentConfig& cfg, const Scenario& sc, std::size_t trial) {
  const auto& p = cfg.filter;
  const std::uint64_t seed = detail::trial_seed(cfg.global_seed, trial);
  TrialResult out;
  out.truth = detail::truth_path(p, cfg.steps, seed);
  detail::FilterState f = detail::initial_filter(p, seed, 0);
  for (std::size_t t = 0; t < cfg.steps; ++t) {
    const auto z = detail::measure_all(sc, out.truth[t], p, seed, t);
    detail::local_filter_step(f, z, sc.map, p, seed, 0, t, out.events);
    // A single estimator: no spread across nodes by construction.
    const CommonError x = estimate(f.particles);
    MetricsRecord r;
    r.t = t;
    r.mean_bias_sq = squared_norm(x.offset - out.truth[t].offset);
    r.rmse = std::sqrt(r.mean_bias_sq);
    r.per_node_error.assign(sc.size(), distance(x.offset, out.truth[t].offset));
    out.estimates.emplace_back(sc.size(), x);
    detail::count_divergence(r, p, out.events);
    out.records.push_back(std::move(r));
  }
  return out;
}

/// Every vehicle runs its own filter on its measurement group and then fuses
/// particles from the vehicles it hears, with weights from the policy.
inline TrialResult run_decentralized_trial(const ExperimentConfig& cfg, const Scenario& sc, std::size_t trial) {
  const auto& p = cfg.filter;
  const std::size_t n = sc.size();
  const std::uint64_t seed = detail::trial_seed(cfg.global_seed, trial);
  TrialResult out;
  out.truth = detail::truth_path(p, cfg.steps, seed);

  std::vector<detail::FilterState> filters;
  for (NodeId i = 0; i < n; ++i) filters.push_back(detail::initial_filter(p, seed, i));
  std::vector<std::vector<NodeId>> groups(n);
  for (NodeId i = 0; i < n; ++i) groups[i] = sc.measurement_group(i);

  std::optional<ConsensusMatrix> fixed;
  if (cfg.policy.is_static()) {
    WeightPolicy pol = cfg.policy;
    if (pol.kind == WeightPolicy::Kind::kRandom) pol.seed = seed_hash({pol.seed, trial});
    fixed = static_weights(pol, sc.support);
  }

  for (std::size_t t = 0; t < cfg.steps; ++t) {
    const auto z = detail::measure_all(sc, out.truth[t], p, seed, t);
    std::vector<std::vector<GnssMeasurement>> local(n);
    for (NodeId i = 0; i < n; ++i) {
      for (auto j : groups[i]) local[i].push_back(z[j]);
      detail::local_filter_step(filters[i], local[i], sc.map, p, seed, i, t, out.events);
    }

    // Round barrier: everybody publishes the post-update snapshot.
    std::vector<ParticleSet> snapshots;
    std::vector<CommonError> estimates;
    for (const auto& f : filters) {
      snapshots.push_back(f.particles);
      estimates.push_back(estimate(f.particles));
    }
    const ConsensusMatrix weights = fixed ? *fixed : variance_min_weights(estimates, sc.support, cfg.qp).weights;

    for (NodeId i = 0; i < n; ++i) {
      const WeightRow row = weights.row(i);
      if (row.size() == 1) continue;  // nobody to fuse with this round
      SnapshotMap sources;
      for (auto [j, a] : row) {
        if (j != i) sources[j] = &snapshots[j];
      }
      auto fused = fuse(i, snapshots[i], sources, row, sc.map, local[i], p.effective_softness(),
                        seed_hash({seed, i, t, tag(Stream::kFuse)}));
      if (fused.degenerate) {
        ++out.events.degenerate;
        filters[i].inflate_next = true;
      }
      if (fused.shortfall) ++out.events.shortfall;
      if (cfg.keep_fusion_log) {
        for (auto [j, c] : fused.counts) {
          if (c > 0) out.fusion_log.push_back({t, i, j, c});
        }
      }
      filters[i].particles = std::move(fused.particles);
      estimates[i] = estimate(filters[i].particles);
    }

    MetricsRecord r = decompose_error(estimates, out.truth[t]);
    r.t = t;
    out.estimates.push_back(estimates);
    detail::count_divergence(r, p, out.events);
    out.records.push_back(std::move(r));
  }
  return out;
}

inline RunResult run_experiment(const ExperimentConfig& cfg, const Scenario& sc) {
  cfg.validate();
  RunResult res;
  for (std::size_t k = 0; k < cfg.trials; ++k) {
    res.trials.push_back(cfg.mode == Mode::kCentralized ? run_centralized_trial(cfg, sc, k)
                                                        : run_decentralized_trial(cfg, sc, k));
  }
  return res;
}

inline std::vector<MetricsRecord> run_centralized(const ExperimentConfig& cfg, const Scenario& sc) {
  return run_centralized_trial(cfg, sc, 0).records;
}

inline std::vector<MetricsRecord> run_decentralized(const ExperimentConfig& cfg, const Scenario& sc) {
  return run_decentralized_trial(cfg, sc, 0).records;
}

inline void write_fusion_log(std::ostream& out, std::span<const FusionLogEntry> log) {
  out << "t node j count\n";
  for (const auto& e : log) out << e.t << ' ' << e.node << ' ' << e.source << ' ' << e.count << '\n';
}

// ---------------------------------------------------------------------------
// Network-density comparison
// ---------------------------------------------------------------------------

struct Table2Cell {
  std::string network;
  std::string mechanism;
  std::size_t nodes = 0;
  double rmse = 0.0;
  double sqrt_variance = 0.0;
  EventCounts events;
  RunResult run;
};

struct Table2 {
  std::vector<std::string> networks;
  std::vector<std::string> mechanisms{"centralized", "optimized", "random"};
  std::vector<Table2Cell> cells;  // network-major

  const Table2Cell& at(std::size_t net, std::size_t mech) const { return cells.at(net * mechanisms.size() + mech); }
};

/// Dense network plus its degree-trimmed versions, each run centralized,
/// with variance-minimizing weights and with random weights.
inline Table2 run_table2_suite(const ExperimentConfig& base, const std::vector<ScenarioSpec>& specs,
                               std::uint64_t random_seed = 7) {
  Table2 table;
  for (const auto& spec : specs) {
    const Scenario sc = build_scenario(spec);
    table.networks.push_back(sc.name);
    for (const auto& mech : table.mechanisms) {
      ExperimentConfig cfg = base;
      if (mech == "centralized") {
        cfg.mode = Mode::kCentralized;
      } else {
        cfg.mode = Mode::kDecentralized;
        cfg.policy = mech == "optimized" ? WeightPolicy::variance_min() : WeightPolicy::random(random_seed);
      }
      Table2Cell cell;
      cell.network = sc.name;
      cell.mechanism = mech;
      cell.nodes = sc.size();
      cell.run = run_experiment(cfg, sc);
      const auto s = cell.run.steady_state_mean();
      cell.rmse = s.rmse;
      cell.sqrt_variance = s.sqrt_variance;
      cell.events = cell.run.total_events();
      table.cells.push_back(std::move(cell));
    }
  }
  return table;
}

inline std::vector<ScenarioSpec> default_table2_networks() {
  return {grid_city_spec(), grid_city_spec(20), grid_city_spec(14)};
}

inline void write_table2_csv(std::ostream& out, const Table2& table) {
  out << "network,nodes,mechanism,rmse,sqrt_variance,degenerate,diverged\n";
  for (const auto& c : table.cells) {
    out << c.network << ',' << c.nodes << ',' << c.mechanism << ',' << format_double(c.rmse) << ','
        << format_double(c.sqrt_variance) << ',' << c.events.degenerate << ',' << c.events.diverged << '\n';
  }
}

}  // namespace cmm
