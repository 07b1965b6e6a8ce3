#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ctpomdp/config.hpp"
#include "ctpomdp/harness.hpp"

using namespace ctpomdp;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  unsigned jobs = 1;
  std::string qtable;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("config", c.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Override run.seed");
  cmd->add_option("--out", c.out, "Output directory (file for solve)");
  cmd->add_option("--jobs", c.jobs, "Worker threads")->check(CLI::PositiveNumber);
}

ExperimentConfig load(const Common& c) {
  ExperimentConfig cfg = load_config(c.config);
  if (c.seed) {
    cfg.run.seed = *c.seed;
    cfg.raw["run"]["seed"] = *c.seed;
  }
  if (!c.qtable.empty()) {
    cfg.qtable_path = c.qtable;
    cfg.raw["solver"]["qtable"] = c.qtable;
  }
  return cfg;
}

void report(const RunSummary& s) {
  const auto r = s.rewards();
  double mean = 0.0;
  for (double v : r) mean += v;
  if (!r.empty()) mean /= static_cast<double>(r.size());
  std::cout << s.label << ": " << r.size() << " trajectories ok, " << s.failures() << " failed, mean reward "
            << format_double(mean) << '\n';
}

int cmd_simulate(const Common& c) {
  ExperimentConfig cfg = load(c);
  cfg.run.write_events = true;
  cfg.raw["run"]["write_events"] = true;
  std::filesystem::create_directories(c.out);
  write_snapshot(cfg, c.out);
  PolicySpec constant{PolicyKind::constant, 1, cfg.policy.action};
  const RunSummary s = run_batch(cfg, nullptr, FilterKind::none, constant, cfg.name, {c.out, c.jobs});
  write_summary_csv(s, cfg.model.actions(), c.out + "/summary.csv");
  write_errors(s, c.out + "/errors.jsonl");
  report(s);
  return s.failures() ? 1 : 0;
}

int cmd_solve(const Common& c) {
  const ExperimentConfig cfg = load(c);
  SolverOptions opt = cfg.solver;
  opt.on_sweep = [](std::size_t sweep, double change) {
    if (sweep % 1000 == 0) std::cerr << "sweep " << sweep << " change " << format_double(change) << '\n';
  };
  const QTable table = solve_q(cfg.model, cfg.reward, solver_box(cfg), opt);
  const std::filesystem::path out(c.out);
  if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
  save_qtable(table, c.out);
  std::cout << "states " << table.box().count() << " sweeps " << table.sweeps << " residual "
            << format_double(table.residual) << (table.converged ? " converged" : " NOT converged") << '\n';
  return table.converged ? 0 : 3;
}

int cmd_filter(const Common& c, const std::vector<std::string>& kinds) {
  ExperimentConfig cfg = load(c);
  std::filesystem::create_directories(c.out);
  write_snapshot(cfg, c.out);
  SimulationOptions opt{cfg.run.t_end, cfg.control_period(), trajectory_seed(cfg.run.seed, 0)};
  ConstantController ctrl(cfg.policy.action);
  const Trajectory traj = simulate(cfg.model, cfg.initial_state, ctrl, cfg.observation, opt);
  write_trajectory_csv(traj, cfg.run.report_step, c.out + "/trajectory_0000.csv");
  write_events_jsonl(traj, c.out + "/events_0000.jsonl");
  std::vector<std::string> list = kinds;
  if (list.empty()) list.push_back(to_string(cfg.filter.kind));
  for (const std::string& k : list) {
    const FilterKind kind = parse_filter_kind(k);
    validate_filter(kind, cfg);
    auto filter = make_filter(cfg, kind, opt.seed);
    const auto samples = replay_filter(*filter, traj, cfg.run.report_step);
    write_filter_csv(samples, c.out + "/filter_" + k + ".csv");
    std::cout << k << ": rmse " << format_double(filter_rmse(traj, samples)) << '\n';
  }
  return 0;
}

int cmd_control(const Common& c) {
  ExperimentConfig cfg = load(c);
  cfg.run.trajectories = 1;
  cfg.run.write_events = true;
  cfg.raw["run"]["trajectories"] = 1;
  cfg.raw["run"]["write_events"] = true;
  const RunSummary s = run_experiment(cfg, {c.out, 1});
  report(s);
  return s.failures() ? 1 : 0;
}

int cmd_experiment(const Common& c) {
  const ExperimentConfig cfg = load(c);
  const RunSummary s = run_experiment(cfg, {c.out, c.jobs});
  report(s);
  return s.failures() ? 1 : 0;
}

int cmd_compare(const Common& c) {
  const ExperimentConfig cfg = load(c);
  const Comparison cmp = compare_policies(cfg, {c.out, c.jobs});
  for (const auto& a : cmp.arms) report(a);
  for (std::size_t k = 0; k < cmp.tests.size(); ++k)
    std::cout << cmp.arms[k].label << " - " << cmp.arms[k + 1].label << ": mean diff "
              << format_double(cmp.tests[k].mean_difference) << ", p " << format_double(cmp.tests[k].p_two_sided)
              << '\n';
  return 0;
}

int cmd_advantage(const Common& c) {
  const ExperimentConfig cfg = load(c);
  std::filesystem::create_directories(c.out);
  const QTable table = obtain_qtable(cfg);
  advantage_grid(cfg, table, c.out + "/advantage.csv");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Filtering and QMDP control for continuous-time POMDPs"};
  app.require_subcommand(1);
  Common c;
  std::vector<std::string> filters;

  auto* sim = app.add_subcommand("simulate", "Simulate trajectories under the constant action policy.action");
  add_common(sim, c);
  auto* solve = app.add_subcommand("solve", "Solve the MDP on the configured box and write the Q table");
  add_common(solve, c);
  auto* filter = app.add_subcommand("filter", "Simulate one trajectory and replay filters along it");
  add_common(filter, c);
  filter->add_option("--filters", filters, "Filter kinds to replay (default: filter.kind)");
  auto* control = app.add_subcommand("control", "One closed-loop trajectory with full dumps");
  add_common(control, c);
  control->add_option("--qtable", c.qtable, "Load the Q table instead of solving");
  auto* experiment = app.add_subcommand("experiment", "Batch of closed-loop trajectories");
  add_common(experiment, c);
  experiment->add_option("--qtable", c.qtable, "Load the Q table instead of solving");
  auto* compare = app.add_subcommand("compare", "Paired-seed policy comparison");
  add_common(compare, c);
  compare->add_option("--qtable", c.qtable, "Load the Q table instead of solving");
  auto* adv = app.add_subcommand("advantage", "Advantage function over a belief-parameter grid");
  add_common(adv, c);
  adv->add_option("--qtable", c.qtable, "Load the Q table instead of solving");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*sim) return cmd_simulate(c);
    if (*solve) return cmd_solve(c);
    if (*filter) return cmd_filter(c, filters);
    if (*control) return cmd_control(c);
    if (*experiment) return cmd_experiment(c);
    if (*compare) return cmd_compare(c);
    if (*adv) return cmd_advantage(c);
  } catch (const Error& e) {
    nlohmann::json err{{"error", to_string(e.kind())}, {"message", e.what()}};
    if (e.has_time()) err["time"] = e.time();
    std::cerr << err.dump() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", "internal"}, {"message", e.what()}}.dump() << '\n';
    return 2;
  }
  return 0;
}
