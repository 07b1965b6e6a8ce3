#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "ctpomdp/config.hpp"
#include "ctpomdp/error.hpp"
#include "ctpomdp/filters.hpp"
#include "ctpomdp/io.hpp"
#include "ctpomdp/mdp_solver.hpp"
#include "ctpomdp/policy.hpp"
#include "ctpomdp/simulate.hpp"

namespace ctpomdp {

/// Runs f(i) for i in [0, n) on `jobs` threads. Exceptions inside f must be
/// handled by f itself.
template <class F>
void parallel_for(std::size_t n, unsigned jobs, F&& f) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < jobs; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) f(i);
    });
  for (auto& t : pool) t.join();
}

inline std::uint64_t trajectory_seed(std::uint64_t base, std::size_t i) { return derive_seed(base, {0x7261ULL, i}); }

inline std::unique_ptr<Filter> make_filter(const ExperimentConfig& cfg, FilterKind kind, std::uint64_t seed) {
  const State& x0 = cfg.initial_state;
  switch (kind) {
    case FilterKind::exact:
      if (const auto* d = std::get_if<ObsConfigD>(&cfg.observation))
        return std::make_unique<ExactFilterD>(cfg.model, filter_box(cfg), x0, *d);
      return std::make_unique<ExactFilterC>(cfg.model, filter_box(cfg), x0, std::get<ObsConfigC>(cfg.observation));
    case FilterKind::binomial:
      return std::make_unique<BinomialFilter>(cfg.model.queue(), x0, std::get<ObsConfigD>(cfg.observation));
    case FilterKind::poisson:
      return std::make_unique<PoissonFilter>(cfg.model.crn(), x0, std::get<ObsConfigD>(cfg.observation));
    case FilterKind::multinomial:
      return std::make_unique<MultinomialFilter>(cfg.model.crn(), x0, std::get<ObsConfigC>(cfg.observation));
    case FilterKind::particle:
      return std::make_unique<ParticleFilter>(cfg.model, x0, cfg.filter.particles,
                                              std::get<ObsConfigD>(cfg.observation),
                                              derive_seed(seed, {stream_particles}));
    case FilterKind::none: break;
  }
  throw Error(ErrorKind::config, "no filter configured");
}

inline QTable obtain_qtable(const ExperimentConfig& cfg) {
  if (cfg.qtable_path) return load_qtable(*cfg.qtable_path);
  return solve_q(cfg.model, cfg.reward, solver_box(cfg), cfg.solver);
}

/// Outcome of one closed-loop trajectory.
struct TrajectoryResult {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double reward = 0.0;
  double truncation_bound = 0.0;
  double filter_rmse = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> occupancy;
  std::vector<double> time_mean, time_var;
  std::size_t jumps = 0;
  double seconds = 0.0;
  Trajectory trajectory;
  std::vector<FilterSample> filter_samples;
};

/// Right-continuous state at time t.
inline State state_at(const Trajectory& traj, double t) {
  State x;
  for (const TrajectoryEvent& e : traj.events) {
    if (e.t > t) break;
    if (e.kind == EventKind::state_jump) x = e.x;
  }
  return x;
}

/// Root-mean-square error of the filter mean against the true state over
/// all recorded samples and components.
inline double filter_rmse(const Trajectory& traj, const std::vector<FilterSample>& samples) {
  if (samples.empty()) return std::numeric_limits<double>::quiet_NaN();
  double acc = 0.0;
  std::size_t count = 0;
  std::size_t next = 0;
  State x;
  for (const FilterSample& f : samples) {
    while (next < traj.events.size() && traj.events[next].t <= f.t) {
      if (traj.events[next].kind == EventKind::state_jump) x = traj.events[next].x;
      ++next;
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = f.mean[i] - x[i];
      acc += d * d;
      ++count;
    }
  }
  return std::sqrt(acc / static_cast<double>(count));
}

/// Runs one trajectory with the given filter/policy pair. Errors are caught
/// and recorded in the result.
inline TrajectoryResult run_trajectory(const ExperimentConfig& cfg, const QTable* table, FilterKind filter,
                                       const PolicySpec& policy, std::size_t index, bool record) {
  TrajectoryResult res;
  res.index = index;
  res.seed = trajectory_seed(cfg.run.seed, index);
  const auto start = std::chrono::steady_clock::now();
  try {
    SimulationOptions opt{cfg.run.t_end, cfg.control_period(), res.seed};
    std::unique_ptr<Controller> ctrl;
    BeliefController* belief_ctrl = nullptr;
    if (policy.kind == PolicyKind::fully_observed) {
      require(table != nullptr, ErrorKind::config, "fully_observed policy needs a Q table");
      ctrl = std::make_unique<FullyObservedController>(*table);
    } else if (policy.kind == PolicyKind::constant && filter == FilterKind::none) {
      ctrl = std::make_unique<ConstantController>(policy.action);
    } else {
      auto bc = std::make_unique<BeliefController>(make_filter(cfg, filter, res.seed), table, policy,
                                                   derive_seed(res.seed, {stream_policy}), record);
      belief_ctrl = bc.get();
      ctrl = std::move(bc);
    }
    res.trajectory = simulate(cfg.model, cfg.initial_state, *ctrl, cfg.observation, opt);
    const RewardIntegral ri = reward_integral(res.trajectory, cfg.reward);
    res.reward = ri.value;
    res.truncation_bound = ri.truncation_bound;
    res.occupancy = action_occupancy(res.trajectory, cfg.model.actions());
    std::tie(res.time_mean, res.time_var) = time_moments(res.trajectory);
    res.jumps = res.trajectory.jumps;
    if (belief_ctrl) {
      res.filter_samples = belief_ctrl->samples();
      res.filter_rmse = filter_rmse(res.trajectory, res.filter_samples);
    }
    res.ok = true;
  } catch (const Error& e) {
    res.error = std::string(to_string(e.kind())) + ": " + e.what();
  } catch (const std::exception& e) {
    res.error = e.what();
  }
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

struct RunSummary {
  std::string label;
  std::vector<TrajectoryResult> results;

  std::vector<double> rewards() const {
    std::vector<double> r;
    for (const auto& t : results)
      if (t.ok) r.push_back(t.reward);
    return r;
  }
  std::size_t failures() const {
    return static_cast<std::size_t>(std::count_if(results.begin(), results.end(), [](const auto& t) { return !t.ok; }));
  }
};

/// Summary CSV: deterministic content only (no wall-clock).
inline void write_summary_csv(const RunSummary& summary, int actions, const std::string& path) {
  CsvWriter csv(path);
  std::vector<std::string> header{"trajectory", "seed", "status", "reward", "truncation_bound", "filter_rmse", "jumps"};
  for (int u = 0; u < actions; ++u) header.push_back("occupancy_u" + std::to_string(u));
  std::size_t dims = 0;
  for (const auto& r : summary.results) dims = std::max(dims, r.time_mean.size());
  for (const auto& s : indexed_names("time_mean_x", dims)) header.push_back(s);
  for (const auto& s : indexed_names("time_var_x", dims)) header.push_back(s);
  csv.header(header);
  for (const TrajectoryResult& r : summary.results) {
    std::vector<std::string> row{format_int(static_cast<long long>(r.index)), std::to_string(r.seed),
                                 r.ok ? "ok" : "error"};
    const double nan = std::numeric_limits<double>::quiet_NaN();
    row.push_back(format_double(r.ok ? r.reward : nan));
    row.push_back(format_double(r.ok ? r.truncation_bound : nan));
    row.push_back(format_double(r.filter_rmse));
    row.push_back(format_int(static_cast<long long>(r.jumps)));
    for (int u = 0; u < actions; ++u)
      row.push_back(format_double(r.ok ? r.occupancy[static_cast<std::size_t>(u)] : nan));
    for (std::size_t i = 0; i < dims; ++i) row.push_back(format_double(i < r.time_mean.size() ? r.time_mean[i] : nan));
    for (std::size_t i = 0; i < dims; ++i) row.push_back(format_double(i < r.time_var.size() ? r.time_var[i] : nan));
    csv.row_strings(row);
  }
}

inline void write_errors(const RunSummary& summary, const std::string& path) {
  std::ofstream out(path);
  for (const auto& r : summary.results)
    if (!r.ok) out << nlohmann::json{{"trajectory", r.index}, {"seed", r.seed}, {"error", r.error}}.dump() << '\n';
}

inline void write_timing(const RunSummary& summary, const std::string& path) {
  CsvWriter csv(path);
  csv.header({"trajectory", "seconds"});
  for (const auto& r : summary.results) csv.row({static_cast<double>(r.index), r.seconds});
}

struct RunOptions {
  std::string out_dir;  // empty: write nothing
  unsigned jobs = 1;
};

/// Runs `trajectories` closed-loop simulations of one filter/policy pair.
inline RunSummary run_batch(const ExperimentConfig& cfg, const QTable* table, FilterKind filter,
                            const PolicySpec& policy, const std::string& label, const RunOptions& opt) {
  RunSummary summary;
  summary.label = label;
  summary.results.resize(cfg.run.trajectories);
  const bool write = !opt.out_dir.empty();
  parallel_for(cfg.run.trajectories, opt.jobs, [&](std::size_t i) {
    TrajectoryResult r = run_trajectory(cfg, table, filter, policy, i, true);
    if (write && r.ok) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%04zu", i);
      const std::string stem = opt.out_dir + "/";
      if (cfg.run.write_trajectories) {
        write_trajectory_csv(r.trajectory, cfg.run.report_step, stem + "trajectory_" + buf + ".csv");
        if (!r.filter_samples.empty()) write_filter_csv(r.filter_samples, stem + "filter_" + buf + ".csv");
      }
      if (cfg.run.write_events) write_events_jsonl(r.trajectory, stem + "events_" + buf + ".jsonl");
    }
    // Drop bulky data once written.
    r.trajectory.events.clear();
    r.trajectory.events.shrink_to_fit();
    r.filter_samples.clear();
    summary.results[i] = std::move(r);
  });
  return summary;
}

inline void write_snapshot(const ExperimentConfig& cfg, const std::string& dir) {
  std::ofstream out(dir + "/config.snapshot");
  out << cfg.raw.dump(2) << '\n';
}

/// Runs the configured experiment and writes config.snapshot,
/// trajectory_####.csv, filter_####.csv, summary.csv (and timing.csv,
/// errors.jsonl) into opt.out_dir.
inline RunSummary run_experiment(const ExperimentConfig& cfg, const RunOptions& opt) {
  if (!opt.out_dir.empty()) {
    std::filesystem::create_directories(opt.out_dir);
    write_snapshot(cfg, opt.out_dir);
  }
  std::optional<QTable> table;
  if (cfg.policy.kind != PolicyKind::constant) {
    table = obtain_qtable(cfg);
    if (!opt.out_dir.empty()) {
      std::ofstream out(opt.out_dir + "/solver.txt");
      out << "residual=" << format_double(table->residual) << " sweeps=" << table->sweeps
          << " converged=" << (table->converged ? 1 : 0) << '\n';
    }
  }
  RunSummary s = run_batch(cfg, table ? &*table : nullptr, cfg.filter.kind, cfg.policy, cfg.name, opt);
  if (!opt.out_dir.empty()) {
    write_summary_csv(s, cfg.model.actions(), opt.out_dir + "/summary.csv");
    write_timing(s, opt.out_dir + "/timing.csv");
    write_errors(s, opt.out_dir + "/errors.jsonl");
  }
  return s;
}

/// Gaussian kernel density estimate with Silverman's rule of thumb
/// h = 0.9 min(sd, IQR / 1.34) n^(-1/5).
struct Kde {
  double bandwidth = 0.0;
  std::vector<double> grid, density;
};

inline double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double silverman_bandwidth(const std::vector<double>& x) {
  const double n = static_cast<double>(x.size());
  double m = 0.0;
  for (double v : x) m += v;
  m /= n;
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  const double sd = n > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
  const double iqr = quantile(x, 0.75) - quantile(x, 0.25);
  double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  if (!(spread > 0.0)) spread = std::max(1e-12, std::fabs(m) * 1e-3 + 1e-12);
  return 0.9 * spread * std::pow(n, -0.2);
}

inline Kde kde(const std::vector<double>& x, double lo, double hi, std::size_t points = 200) {
  require(!x.empty(), ErrorKind::invalid_argument, "kde: empty sample");
  Kde k;
  k.bandwidth = silverman_bandwidth(x);
  const double norm = 1.0 / (static_cast<double>(x.size()) * k.bandwidth * std::sqrt(2.0 * M_PI));
  for (std::size_t i = 0; i < points; ++i) {
    const double g = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    double d = 0.0;
    for (double v : x) {
      const double z = (g - v) / k.bandwidth;
      d += std::exp(-0.5 * z * z);
    }
    k.grid.push_back(g);
    k.density.push_back(d * norm);
  }
  return k;
}

struct PairedTest {
  std::size_t n = 0;
  double mean_difference = 0.0;
  double t = 0.0;
  double p_two_sided = 1.0;
  double p_greater = 1.0;  // H1: mean(a - b) > 0
};

/// Paired Student t-test on a - b.
inline PairedTest paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  require(a.size() == b.size() && a.size() >= 2, ErrorKind::invalid_argument, "paired t-test: need >= 2 pairs");
  PairedTest out;
  out.n = a.size();
  const double n = static_cast<double>(a.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m += a[i] - b[i];
  m /= n;
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) ss += (a[i] - b[i] - m) * (a[i] - b[i] - m);
  const double se = std::sqrt(ss / (n - 1) / n);
  out.mean_difference = m;
  if (se == 0.0) {
    out.t = m == 0.0 ? 0.0 : std::copysign(INFINITY, m);
    out.p_two_sided = m == 0.0 ? 1.0 : 0.0;
    out.p_greater = m > 0.0 ? 0.0 : 1.0;
    return out;
  }
  out.t = m / se;
  const boost::math::students_t dist(n - 1);
  out.p_two_sided = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(out.t)));
  out.p_greater = boost::math::cdf(boost::math::complement(dist, out.t));
  return out;
}

struct Comparison {
  std::vector<RunSummary> arms;
  /// tests[i] compares arm i against arm i+1 (paired by seed).
  std::vector<PairedTest> tests;
  PairedTest first_vs_last;
};

/// Paired-seed runs of every configured compare arm, with KDE curves and
/// paired t-tests. Only trajectories that succeeded in every arm are paired.
inline Comparison compare_policies(const ExperimentConfig& cfg, const RunOptions& opt) {
  require(cfg.compare.size() >= 2, ErrorKind::config, "compare: need at least two arms");
  if (!opt.out_dir.empty()) {
    std::filesystem::create_directories(opt.out_dir);
    write_snapshot(cfg, opt.out_dir);
  }
  const QTable table = obtain_qtable(cfg);
  Comparison cmp;
  RunOptions inner = opt;
  for (const CompareArm& arm : cfg.compare) {
    if (!opt.out_dir.empty()) {
      inner.out_dir = opt.out_dir + "/" + arm.label;
      std::filesystem::create_directories(inner.out_dir);
    }
    cmp.arms.push_back(run_batch(cfg, &table, arm.filter, arm.policy, arm.label, inner));
    if (!inner.out_dir.empty()) {
      write_summary_csv(cmp.arms.back(), cfg.model.actions(), inner.out_dir + "/summary.csv");
      write_errors(cmp.arms.back(), inner.out_dir + "/errors.jsonl");
    }
  }

  std::vector<std::vector<double>> paired(cmp.arms.size());
  for (std::size_t i = 0; i < cfg.run.trajectories; ++i) {
    bool all = true;
    for (const auto& a : cmp.arms) all = all && a.results[i].ok;
    if (!all) continue;
    for (std::size_t k = 0; k < cmp.arms.size(); ++k) paired[k].push_back(cmp.arms[k].results[i].reward);
  }
  if (paired[0].size() >= 2) {
    for (std::size_t k = 0; k + 1 < paired.size(); ++k) cmp.tests.push_back(paired_t_test(paired[k], paired[k + 1]));
    cmp.first_vs_last = paired_t_test(paired.front(), paired.back());
  }

  if (!opt.out_dir.empty()) {
    CsvWriter rewards(opt.out_dir + "/rewards.csv");
    std::vector<std::string> header{"trajectory"};
    for (const auto& a : cmp.arms) header.push_back(a.label);
    rewards.header(header);
    for (std::size_t i = 0; i < paired[0].size(); ++i) {
      std::vector<double> row{static_cast<double>(i)};
      for (const auto& p : paired) row.push_back(p[i]);
      rewards.row(row);
    }
    if (!paired[0].empty()) {
      double lo = INFINITY, hi = -INFINITY;
      std::vector<Kde> curves;
      for (const auto& p : paired) {
        lo = std::min(lo, *std::min_element(p.begin(), p.end()));
        hi = std::max(hi, *std::max_element(p.begin(), p.end()));
      }
      for (const auto& p : paired) {
        const double h = silverman_bandwidth(p);
        curves.push_back(kde(p, lo - 3 * h, hi + 3 * h));
      }
      // Common grid for all arms.
      double glo = INFINITY, ghi = -INFINITY;
      for (const auto& c : curves) glo = std::min(glo, c.grid.front()), ghi = std::max(ghi, c.grid.back());
      CsvWriter k(opt.out_dir + "/kde.csv");
      std::vector<std::string> kh{"reward"};
      for (const auto& a : cmp.arms) kh.push_back(a.label);
      k.header(kh);
      curves.clear();
      for (const auto& p : paired) curves.push_back(kde(p, glo, ghi));
      for (std::size_t g = 0; g < curves[0].grid.size(); ++g) {
        std::vector<double> row{curves[0].grid[g]};
        for (const auto& c : curves) row.push_back(c.density[g]);
        k.row(row);
      }
      CsvWriter bw(opt.out_dir + "/kde_bandwidth.csv");
      bw.header({"arm", "bandwidth"});
      for (std::size_t a = 0; a < curves.size(); ++a)
        bw.row_strings({cmp.arms[a].label, format_double(curves[a].bandwidth)});
    }
    CsvWriter tests(opt.out_dir + "/tests.csv");
    tests.header({"a", "b", "n", "mean_difference", "t", "p_two_sided", "p_greater"});
    auto emit = [&](const std::string& a, const std::string& b, const PairedTest& t) {
      tests.row_strings({a, b, format_int(static_cast<long long>(t.n)), format_double(t.mean_difference),
                         format_double(t.t), format_double(t.p_two_sided), format_double(t.p_greater)});
    };
    for (std::size_t k = 0; k < cmp.tests.size(); ++k) emit(cmp.arms[k].label, cmp.arms[k + 1].label, cmp.tests[k]);
    if (!cmp.tests.empty()) emit(cmp.arms.front().label, cmp.arms.back().label, cmp.first_vs_last);
  }
  return cmp;
}

/// Grid of parameter vectors spanning [lower, upper] with steps[i] points
/// per dimension (row-major, last dimension fastest).
inline std::vector<std::vector<double>> parameter_grid(const AdvantageSpec& spec) {
  std::vector<std::vector<double>> grid{{}};
  for (std::size_t d = 0; d < spec.lower.size(); ++d) {
    std::vector<std::vector<double>> next;
    for (const auto& g : grid)
      for (int k = 0; k < spec.steps[d]; ++k) {
        auto v = g;
        const double frac = spec.steps[d] == 1 ? 0.0 : static_cast<double>(k) / (spec.steps[d] - 1);
        v.push_back(spec.lower[d] + frac * (spec.upper[d] - spec.lower[d]));
        next.push_back(std::move(v));
      }
    grid = std::move(next);
  }
  return grid;
}

/// Writes theta_1..theta_n, advantage_u0.., argmax for every grid point of a
/// product-family belief (binomial for queues, Poisson for CRNs).
inline void advantage_grid(const ExperimentConfig& cfg, const QTable& table, const std::string& path) {
  require(cfg.advantage.has_value(), ErrorKind::config, "advantage: config has no 'advantage' section");
  const auto grid = parameter_grid(*cfg.advantage);
  std::vector<std::vector<double>> values;
  for (Action u = 0; u < table.actions(); ++u) {
    if (cfg.model.is_queue()) {
      const auto trials = cfg.model.queue().buffers();
      values.push_back(advantage_surface(table, grid, u, [&](const std::vector<double>& t) {
        return BinomialBelief(t, trials);
      }));
    } else {
      values.push_back(advantage_surface(table, grid, u, [](const std::vector<double>& t) { return PoissonBelief(t); }));
    }
  }
  CsvWriter csv(path);
  std::vector<std::string> header = indexed_names("theta_", cfg.advantage->lower.size());
  for (Action u = 0; u < table.actions(); ++u) header.push_back("advantage_u" + std::to_string(u));
  header.push_back("argmax");
  csv.header(header);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    std::vector<double> row = grid[g];
    std::vector<double> a;
    for (const auto& v : values) a.push_back(v[g]);
    row.insert(row.end(), a.begin(), a.end());
    row.push_back(argmax(a));
    csv.row(row);
  }
}

}  // namespace ctpomdp
