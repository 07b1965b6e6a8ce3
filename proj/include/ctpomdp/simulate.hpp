#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ctpomdp/error.hpp"
#include "ctpomdp/io.hpp"
#include "ctpomdp/model.hpp"
#include "ctpomdp/rng.hpp"

namespace ctpomdp {

/// Noisy measurements N(y | x_i, var) of the masked components on the grid
/// {period, 2 period, ...}.
struct ObsConfigD {
  double period = 1.0;
  double noise_var = 1.0;
  std::vector<bool> mask;

  std::size_t observed_count() const { return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true)); }

  void validate(int dims) const {
    require(period > 0.0, ErrorKind::config, "observation: period must be positive");
    require(noise_var > 0.0, ErrorKind::config, "observation: noise variance must be positive");
    require(static_cast<int>(mask.size()) == dims, ErrorKind::config,
            "observation: mask length must match the model dimension");
    require(observed_count() > 0, ErrorKind::config, "observation: no observed component");
  }
};

/// Exact continuous observation of the listed components.
struct ObsConfigC {
  std::vector<int> observed;

  void validate(int dims) const {
    require(!observed.empty() && static_cast<int>(observed.size()) < dims, ErrorKind::config,
            "observation: model C needs a non-empty proper subset of components");
    std::vector<bool> seen(static_cast<std::size_t>(dims), false);
    for (int i : observed) {
      require(i >= 0 && i < dims, ErrorKind::config, "observation: component index out of range");
      require(!seen[static_cast<std::size_t>(i)], ErrorKind::config, "observation: duplicate index");
      seen[static_cast<std::size_t>(i)] = true;
    }
  }

  std::vector<int> latent(int dims) const {
    std::vector<int> out;
    for (int i = 0; i < dims; ++i)
      if (std::find(observed.begin(), observed.end(), i) == observed.end()) out.push_back(i);
    return out;
  }

  std::vector<int> project(const State& x) const {
    std::vector<int> y(observed.size());
    for (std::size_t k = 0; k < y.size(); ++k) y[k] = x[static_cast<std::size_t>(observed[k])];
    return y;
  }
};

/// Full state observation (the controller sees every jump).
struct ObsFull {};

using ObsConfig = std::variant<ObsFull, ObsConfigD, ObsConfigC>;

enum class EventKind { state_jump, observation_D, observation_C, control_switch };

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::state_jump: return "state_jump";
    case EventKind::observation_D: return "observation_D";
    case EventKind::observation_C: return "observation_C";
    case EventKind::control_switch: return "control_switch";
  }
  return "unknown";
}

struct TrajectoryEvent {
  double t = 0.0;
  EventKind kind = EventKind::state_jump;
  State x;                // state_jump
  std::vector<double> y;  // observation_D
  std::vector<int> yc;    // observation_C
  Action u = 0;           // control_switch
};

/// Time-ordered event list. The first two events are the initial state and
/// the initial action, both at t = 0.
struct Trajectory {
  std::vector<TrajectoryEvent> events;
  double t_end = 0.0;
  std::size_t jumps = 0;
};

/// Decision maker driven by the simulator. Hooks receive only what the
/// observation model reveals; `act` is called at every decision point.
class Controller {
 public:
  virtual ~Controller() = default;
  /// True for controllers that see the latent state (called after every jump).
  virtual bool observes_state() const { return false; }
  virtual void on_state(double /*t*/, const State& /*x*/) {}
  virtual void on_observation(double /*t*/, std::span<const double> /*y*/) {}
  virtual void on_observed_jump(double /*t*/, std::span<const int> /*y_new*/) {}
  virtual Action act(double t) = 0;
};

class ConstantController final : public Controller {
 public:
  explicit ConstantController(Action u) : u_(u) {}
  Action act(double) override { return u_; }

 private:
  Action u_;
};

/// Picks one channel proportionally to its rate. Returns channels() when all
/// rates vanish.
inline std::size_t pick_channel(const Model& model, const State& x, Action u, double total, Rng& rng) {
  const double target = rng.uniform() * total;
  double acc = 0.0;
  std::size_t last = model.channels();
  for (std::size_t k = 0; k < model.channels(); ++k) {
    const double r = model.channel_rate(x, u, k);
    if (r <= 0.0) continue;
    acc += r;
    last = k;
    if (target < acc) return k;
  }
  return last;
}

/// Gillespie simulation of x over `horizon` under constant u. Returns the
/// number of jumps.
inline std::size_t ssa_advance(const Model& model, State& x, Action u, double horizon, Rng& rng) {
  double t = 0.0;
  std::size_t jumps = 0;
  for (;;) {
    const double total = model.exit_rate(x, u);
    if (!(total > 0.0)) return jumps;
    require(std::isfinite(total), ErrorKind::invalid_argument, "ssa: infinite total rate");
    t += rng.exponential(total);
    if (t >= horizon) return jumps;
    const std::size_t k = pick_channel(model, x, u, total, rng);
    const std::vector<int>& v = model.channel_change(k);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += v[i];
    ++jumps;
  }
}

struct SimulationOptions {
  double t_end = 1.0;
  /// Re-evaluation grid for the controller; 0 disables it.
  double control_period = 0.0;
  std::uint64_t seed = 0;
};

/// Simulates the controlled process from x0. Holding times are redrawn
/// after every decision point, which is exact by memorylessness.
inline Trajectory simulate(const Model& model, const State& x0, Controller& controller, const ObsConfig& obs,
                           const SimulationOptions& opt) {
  require(opt.t_end > 0.0, ErrorKind::invalid_argument, "simulate: t_end must be positive");
  require(model.contains(x0), ErrorKind::invalid_argument, "simulate: initial state outside the model");
  require(opt.control_period >= 0.0, ErrorKind::invalid_argument, "simulate: negative control period");
  Rng dyn(derive_seed(opt.seed, {stream_dynamics}));
  Rng noise(derive_seed(opt.seed, {stream_observation}));

  const auto* obs_d = std::get_if<ObsConfigD>(&obs);
  const auto* obs_c = std::get_if<ObsConfigC>(&obs);
  if (obs_d) obs_d->validate(model.dims());
  if (obs_c) obs_c->validate(model.dims());
  const bool full = std::holds_alternative<ObsFull>(obs) || controller.observes_state();

  Trajectory traj;
  traj.t_end = opt.t_end;
  State x = x0;
  double t = 0.0;
  traj.events.push_back({0.0, EventKind::state_jump, x, {}, {}, 0});
  if (full) controller.on_state(0.0, x);
  Action u = controller.act(0.0);
  require(u >= 0 && u < model.actions(), ErrorKind::invalid_argument, "simulate: controller returned bad action");
  traj.events.push_back({0.0, EventKind::control_switch, {}, {}, {}, u});

  const double inf = std::numeric_limits<double>::infinity();
  std::size_t obs_index = 1, ctrl_index = 1;
  auto next_obs = [&] { return obs_d ? obs_index * obs_d->period : inf; };
  auto next_ctrl = [&] { return opt.control_period > 0.0 ? ctrl_index * opt.control_period : inf; };

  auto decide = [&](double now) {
    const Action nu = controller.act(now);
    require(nu >= 0 && nu < model.actions(), ErrorKind::invalid_argument,
            "simulate: controller returned bad action");
    if (nu != u) {
      u = nu;
      traj.events.push_back({now, EventKind::control_switch, {}, {}, {}, u});
    }
  };

  for (;;) {
    const double total = model.exit_rate(x, u);
    require(std::isfinite(total), ErrorKind::invalid_argument, "simulate: infinite total rate");
    const double horizon = std::min({next_obs(), next_ctrl(), opt.t_end});
    const double hold = total > 0.0 ? dyn.exponential(total) : inf;
    if (t + hold < horizon) {
      t += hold;
      const std::size_t k = pick_channel(model, x, u, total, dyn);
      const std::vector<int>& v = model.channel_change(k);
      for (std::size_t i = 0; i < x.size(); ++i) x[i] += v[i];
      ++traj.jumps;
      traj.events.push_back({t, EventKind::state_jump, x, {}, {}, u});
      bool decision = false;
      if (full) {
        controller.on_state(t, x);
        decision = true;
      }
      if (obs_c) {
        bool touched = false;
        for (int i : obs_c->observed) touched = touched || v[static_cast<std::size_t>(i)] != 0;
        if (touched) {
          const std::vector<int> yc = obs_c->project(x);
          traj.events.push_back({t, EventKind::observation_C, {}, {}, yc, u});
          controller.on_observed_jump(t, yc);
          decision = true;
        }
      }
      if (decision) decide(t);
      continue;
    }
    t = horizon;
    if (t >= opt.t_end) break;
    bool decision = false;
    if (obs_d && t == next_obs()) {
      std::vector<double> y;
      const double sd = std::sqrt(obs_d->noise_var);
      for (std::size_t i = 0; i < x.size(); ++i)
        if (obs_d->mask[i]) y.push_back(x[i] + sd * noise.normal());
      traj.events.push_back({t, EventKind::observation_D, {}, y, {}, u});
      controller.on_observation(t, y);
      ++obs_index;
      decision = true;
    }
    if (t == next_ctrl()) {
      ++ctrl_index;
      decision = true;
    }
    if (decision) decide(t);
  }
  return traj;
}

/// Result of integrating e^{-t/tau} R over a trajectory.
struct RewardIntegral {
  double value = 0.0;
  /// |R_max| tau e^{-t_end/tau}: bound on the omitted tail beyond t_end.
  double truncation_bound = 0.0;
};

/// Sum over constant (state, action) segments of R tau (e^{-ta/tau} - e^{-tb/tau}).
inline RewardIntegral reward_integral(const Trajectory& traj, const RewardSpec& spec) {
  RewardIntegral out;
  if (traj.events.empty()) return out;
  const double tau = spec.discount;
  State x;
  Action u = 0;
  double ta = 0.0;
  double rmax = 0.0;
  auto close = [&](double tb) {
    if (x.empty() || tb <= ta) return;
    const double r = spec(x, u);
    rmax = std::max(rmax, std::fabs(r));
    out.value += r * tau * (std::exp(-ta / tau) - std::exp(-tb / tau));
  };
  for (const TrajectoryEvent& e : traj.events) {
    if (e.kind != EventKind::state_jump && e.kind != EventKind::control_switch) continue;
    close(e.t);
    ta = std::max(ta, e.t);
    if (e.kind == EventKind::state_jump) x = e.x;
    else u = e.u;
  }
  close(traj.t_end);
  if (!x.empty()) rmax = std::max(rmax, std::fabs(spec(x, u)));
  out.truncation_bound = rmax * tau * std::exp(-traj.t_end / tau);
  return out;
}

/// Time-weighted mean and variance of each state component over [0, t_end].
inline std::pair<std::vector<double>, std::vector<double>> time_moments(const Trajectory& traj) {
  std::vector<double> s1, s2;
  State x;
  double ta = 0.0;
  auto close = [&](double tb) {
    if (x.empty() || tb <= ta) return;
    if (s1.empty()) s1.assign(x.size(), 0.0), s2.assign(x.size(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      s1[i] += x[i] * (tb - ta);
      s2[i] += static_cast<double>(x[i]) * x[i] * (tb - ta);
    }
  };
  for (const TrajectoryEvent& e : traj.events) {
    if (e.kind != EventKind::state_jump) continue;
    close(e.t);
    ta = std::max(ta, e.t);
    x = e.x;
  }
  close(traj.t_end);
  for (std::size_t i = 0; i < s1.size(); ++i) {
    s1[i] /= traj.t_end;
    s2[i] = s2[i] / traj.t_end - s1[i] * s1[i];
  }
  return {s1, s2};
}

/// Fraction of [0, t_end] spent under each action.
inline std::vector<double> action_occupancy(const Trajectory& traj, int actions) {
  std::vector<double> occ(static_cast<std::size_t>(actions), 0.0);
  Action u = 0;
  double ta = 0.0;
  for (const TrajectoryEvent& e : traj.events) {
    if (e.kind != EventKind::control_switch) continue;
    occ[static_cast<std::size_t>(u)] += e.t - ta;
    ta = e.t;
    u = e.u;
  }
  occ[static_cast<std::size_t>(u)] += traj.t_end - ta;
  for (double& o : occ) o /= traj.t_end;
  return occ;
}

inline void write_events_jsonl(const Trajectory& traj, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot open " + path + " for writing");
  for (const TrajectoryEvent& e : traj.events) {
    nlohmann::json payload;
    switch (e.kind) {
      case EventKind::state_jump: payload["x"] = e.x; break;
      case EventKind::observation_D: payload["y"] = e.y; break;
      case EventKind::observation_C: payload["y"] = e.yc; break;
      case EventKind::control_switch: payload["u"] = e.u; break;
    }
    out << nlohmann::json{{"t", e.t}, {"kind", to_string(e.kind)}, {"payload", payload}}.dump() << '\n';
  }
}

/// Samples (x, u, latest observation) on the grid {0, dt, 2 dt, ..., t_end}.
inline void write_trajectory_csv(const Trajectory& traj, double dt, const std::string& path) {
  require(dt > 0.0, ErrorKind::invalid_argument, "trajectory csv: report step must be positive");
  State x;
  Action u = 0;
  std::vector<double> y;
  std::size_t dims = 0, ny = 0;
  for (const TrajectoryEvent& e : traj.events) {
    if (e.kind == EventKind::state_jump) dims = e.x.size();
    if (e.kind == EventKind::observation_D) ny = e.y.size();
    if (e.kind == EventKind::observation_C) ny = e.yc.size();
    if (dims && ny) break;
  }
  std::vector<std::string> header{"t"};
  for (const std::string& s : indexed_names("x_", dims)) header.push_back(s);
  header.push_back("u");
  for (const std::string& s : indexed_names("y_", ny)) header.push_back(s);
  CsvWriter csv(path);
  csv.header(header);
  y.assign(ny, std::numeric_limits<double>::quiet_NaN());

  std::size_t next = 0;
  const std::size_t steps = static_cast<std::size_t>(std::floor(traj.t_end / dt + 1e-9));
  for (std::size_t k = 0; k <= steps; ++k) {
    const double t = k * dt;
    while (next < traj.events.size() && traj.events[next].t <= t) {
      const TrajectoryEvent& e = traj.events[next++];
      if (e.kind == EventKind::state_jump) x = e.x;
      else if (e.kind == EventKind::control_switch) u = e.u;
      else if (e.kind == EventKind::observation_D) y = e.y;
      else y.assign(e.yc.begin(), e.yc.end());
    }
    std::vector<double> row{t};
    for (int v : x) row.push_back(v);
    row.push_back(u);
    for (double v : y) row.push_back(v);
    csv.row(row);
  }
}

}  // namespace ctpomdp
