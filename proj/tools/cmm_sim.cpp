// cmm-sim: cooperative map matching simulator.
//
//   cmm-sim run --scenario four_vehicle --policy constant:0.4 --out out/
//   cmm-sim table2 --out out/
//   cmm-sim analyze --weights max_degree --net grid_city

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "cmm/consensus.hpp"
#include "cmm/experiment.hpp"
#include "cmm/metrics.hpp"
#include "cmm/scenario.hpp"

namespace fs = std::filesystem;
using namespace cmm;

namespace {

struct CommonOptions {
  std::size_t steps = 300;
  std::size_t trials = 3;
  std::uint64_t seed = 1;
  std::size_t particles = 500;
  double qp_floor = 0.05;
  std::size_t qp_iters = 5000;
  std::optional<std::size_t> qp_distributed;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--steps", o.steps, "Timesteps per trial")->check(CLI::PositiveNumber);
  cmd->add_option("--trials", o.trials, "Independent trials")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", o.seed, "Global seed");
  cmd->add_option("--particles", o.particles, "Particles per filter")->check(CLI::Range(10, 1000000));
  cmd->add_option("--qp-floor", o.qp_floor, "Minimum self weight for variance minimization")->check(CLI::Range(0.0, 0.999));
  cmd->add_option("--qp-iters", o.qp_iters, "Projected-gradient iteration cap")->check(CLI::PositiveNumber);
  cmd->add_option("--qp-distributed", o.qp_distributed,
                  "Estimate the network mean by K averaging rounds per iteration (0 = 2 x diameter)");
}

ExperimentConfig make_config(const CommonOptions& o, const Scenario& sc) {
  ExperimentConfig cfg;
  cfg.steps = o.steps;
  cfg.trials = o.trials;
  cfg.global_seed = o.seed;
  cfg.filter.particles = o.particles;
  cfg.qp.floor = o.qp_floor;
  cfg.qp.max_iterations = o.qp_iters;
  if (o.qp_distributed) {
    std::size_t k = *o.qp_distributed;
    if (k == 0) {
      const auto d = network_diameter(sc.network);
      if (!d) throw std::runtime_error("--qp-distributed 0 needs a connected network");
      k = std::max<std::size_t>(2 * *d, 1);
    }
    cfg.qp.distributed_rounds = k;
  }
  return cfg;
}

Scenario load(const std::string& name, const std::string& map_path) {
  ScenarioSpec spec = resolve_scenario(name);
  if (!map_path.empty()) spec.map = load_road_map(map_path);
  return build_scenario(spec);
}

void write_run(const fs::path& dir, const std::string& prefix, const RunResult& res) {
  for (std::size_t k = 0; k < res.trials.size(); ++k) {
    const auto& tr = res.trials[k];
    emit_series(tr.records, (dir / (prefix + "metrics_trial" + std::to_string(k) + ".csv")).string());
    if (!tr.fusion_log.empty()) {
      std::ofstream log(dir / (prefix + "fusion_log_trial" + std::to_string(k) + ".txt"));
      write_fusion_log(log, tr.fusion_log);
    }
  }
}

int cmd_run(const std::string& scenario, const std::string& map_path, const std::string& policy,
            const std::string& mode, const CommonOptions& o, const fs::path& out) {
  const Scenario sc = load(scenario, map_path);
  ExperimentConfig cfg = make_config(o, sc);
  cfg.policy = WeightPolicy::parse(policy);
  cfg.mode = parse_mode(mode);
  fs::create_directories(out);
  const RunResult res = run_experiment(cfg, sc);
  write_run(out, "", res);

  const auto ss = res.steady_state_mean();
  const auto ev = res.total_events();
  std::ofstream sum(out / "summary.txt");
  sum << "scenario=" << sc.name << '\n'
      << "nodes=" << sc.size() << '\n'
      << "mode=" << mode_name(cfg.mode) << '\n'
      << "policy=" << cfg.policy.name() << '\n'
      << "steps=" << cfg.steps << '\n'
      << "trials=" << cfg.trials << '\n'
      << "seed=" << cfg.global_seed << '\n'
      << "steady_rmse=" << format_double(ss.rmse) << '\n'
      << "steady_sqrt_variance=" << format_double(ss.sqrt_variance) << '\n'
      << "degenerate_events=" << ev.degenerate << '\n'
      << "shortfall_events=" << ev.shortfall << '\n'
      << "diverged_node_steps=" << ev.diverged << '\n';
  std::cout << sc.name << " " << mode_name(cfg.mode) << " " << cfg.policy.name() << ": steady rmse "
            << ss.rmse << " m, sqrt variance " << ss.sqrt_variance << " m\n";
  return 0;
}

int cmd_table2(const CommonOptions& o, const fs::path& out) {
  fs::create_directories(out);
  ExperimentConfig cfg = make_config(o, build_scenario(grid_city_spec()));
  cfg.qp.distributed_rounds.reset();
  const Table2 table = run_table2_suite(cfg, default_table2_networks());
  {
    std::ofstream csv(out / "table2.csv");
    write_table2_csv(csv, table);
  }
  for (const auto& c : table.cells) write_run(out, c.network + "_" + c.mechanism + "_", c.run);

  std::cout << "RMSE (m)";
  for (const auto& n : table.networks) std::cout << '\t' << n;
  std::cout << '\n';
  for (std::size_t m = 0; m < table.mechanisms.size(); ++m) {
    std::cout << table.mechanisms[m];
    for (std::size_t n = 0; n < table.networks.size(); ++n) std::cout << '\t' << table.at(n, m).rmse;
    std::cout << '\n';
  }
  return 0;
}

int cmd_analyze(const std::string& weights, const std::string& net_name, const std::string& map_path) {
  const Scenario sc = load(net_name, map_path);
  const WeightPolicy policy = WeightPolicy::parse(weights);
  ConsensusMatrix a;
  if (policy.is_static()) {
    a = static_weights(policy, sc.support);
  } else {
    // Without estimates the optimizer has nothing to move; report its start point.
    const std::vector<CommonError> zeros(sc.size());
    a = variance_min_weights(zeros, sc.support).weights;
  }
  const auto rate = asymptotic_convergence_rate(a);
  const auto diameter = network_diameter(sc.network);

  std::cout << "scenario " << sc.name << '\n'
            << "nodes " << sc.size() << '\n'
            << "edges " << sc.network.edge_count() << '\n'
            << "connected " << (is_connected(sc.network) ? "yes" : "no") << '\n'
            << "components " << component_count(sc.network) << '\n'
            << "diameter " << (diameter ? std::to_string(*diameter) : std::string("inf")) << '\n'
            << "policy " << policy.name() << '\n'
            << "convergence_rate " << rate.rate << (rate.disconnected ? " (disconnected)" : "") << '\n'
            << "degree_histogram";
  for (auto h : degree_histogram(sc.network)) std::cout << ' ' << h;
  std::cout << "\nroad_angle_histogram_deg10";
  for (double h : road_angle_histogram(sc.map, 18)) std::cout << ' ' << h;
  std::cout << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cooperative map matching simulator"};
  app.require_subcommand(1);

  CommonOptions run_opts;
  std::string scenario, map_path, policy = "variance_min", mode = "decentralized", out_dir = "out";
  auto* run = app.add_subcommand("run", "Simulate one scenario under one weight policy");
  run->add_option("--scenario", scenario, "Built-in name or scenario file")->required();
  run->add_option("--map", map_path, "Road map file overriding the scenario's map");
  run->add_option("--policy", policy, "variance_min | max_degree | constant:<alpha> | random:<seed> | identity");
  run->add_option("--mode", mode, "centralized | decentralized");
  run->add_option("--out", out_dir, "Output directory");
  add_common(run, run_opts);

  CommonOptions t2_opts;
  std::string t2_out = "out";
  auto* table2 = app.add_subcommand("table2", "Centralized / optimized / random on dense, 75% and 50% networks");
  table2->add_option("--out", t2_out, "Output directory");
  add_common(table2, t2_opts);

  std::string weights = "max_degree", net_name, an_map;
  auto* analyze = app.add_subcommand("analyze", "Topology and convergence-rate report");
  analyze->add_option("--weights", weights, "Weight policy")->required();
  analyze->add_option("--net", net_name, "Built-in name or scenario file")->required();
  analyze->add_option("--map", an_map, "Road map file overriding the scenario's map");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(scenario, map_path, policy, mode, run_opts, out_dir);
    if (*table2) return cmd_table2(t2_opts, t2_out);
    if (*analyze) return cmd_analyze(weights, net_name, an_map);
  } catch (const std::exception& e) {
    std::cerr << "cmm-sim: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
