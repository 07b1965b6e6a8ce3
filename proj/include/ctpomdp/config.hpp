#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ctpomdp/error.hpp"
#include "ctpomdp/filters.hpp"
#include "ctpomdp/mdp_solver.hpp"
#include "ctpomdp/model.hpp"
#include "ctpomdp/simulate.hpp"
#include "ctpomdp/state_box.hpp"

namespace ctpomdp {

using nlohmann::json;

enum class FilterKind { exact, binomial, poisson, multinomial, particle, none };

inline const char* to_string(FilterKind k) {
  switch (k) {
    case FilterKind::exact: return "exact";
    case FilterKind::binomial: return "binomial";
    case FilterKind::poisson: return "poisson";
    case FilterKind::multinomial: return "multinomial";
    case FilterKind::particle: return "particle";
    case FilterKind::none: return "none";
  }
  return "unknown";
}

inline FilterKind parse_filter_kind(const std::string& s) {
  if (s == "exact") return FilterKind::exact;
  if (s == "binomial") return FilterKind::binomial;
  if (s == "poisson") return FilterKind::poisson;
  if (s == "multinomial") return FilterKind::multinomial;
  if (s == "particle") return FilterKind::particle;
  if (s == "none") return FilterKind::none;
  throw Error(ErrorKind::config, "unknown filter kind '" + s + "'");
}

inline PolicyKind parse_policy_kind(const std::string& s) {
  if (s == "qmdp_mc") return PolicyKind::qmdp_mc;
  if (s == "qmdp_exact") return PolicyKind::qmdp_exact;
  if (s == "fully_observed") return PolicyKind::fully_observed;
  if (s == "constant") return PolicyKind::constant;
  throw Error(ErrorKind::config, "unknown policy kind '" + s + "'");
}

struct FilterSpec {
  FilterKind kind = FilterKind::none;
  std::optional<StateBox> box;  // exact filter truncation
  std::size_t particles = 10000;
};

struct RunSpec {
  double t_end = 10.0;
  std::size_t trajectories = 1;
  std::uint64_t seed = 1;
  double control_period = 0.0;  // 0: derived from the observation model
  double report_step = 0.1;
  bool write_events = false;
  bool write_trajectories = true;
};

struct AdvantageSpec {
  std::vector<double> lower, upper;
  std::vector<int> steps;
};

/// Policy comparison: one entry per arm, paired by trajectory seed.
struct CompareArm {
  std::string label;
  FilterKind filter = FilterKind::none;
  PolicySpec policy;
};

struct ExperimentConfig {
  std::string name;
  Model model;
  RewardSpec reward;
  ObsConfig observation;
  State initial_state;
  FilterSpec filter;
  PolicySpec policy;
  std::optional<StateBox> solver_box;
  SolverOptions solver;
  std::optional<std::string> qtable_path;
  RunSpec run;
  std::optional<AdvantageSpec> advantage;
  std::vector<CompareArm> compare;
  json raw;

  double control_period() const {
    if (run.control_period > 0.0) return run.control_period;
    if (const auto* d = std::get_if<ObsConfigD>(&observation)) return d->period / 10.0;
    return run.report_step;
  }
};

namespace detail {

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

inline StateBox parse_box(const json& j) {
  std::optional<int> total;
  if (j.contains("total")) total = j.at("total").get<int>();
  return StateBox(j.at("lower").get<std::vector<int>>(), j.at("upper").get<std::vector<int>>(), total);
}

inline Model parse_model(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "crn") {
    const int species = j.at("species").get<int>();
    const int actions = j.at("actions").get<int>();
    std::vector<Reaction> reactions;
    for (const json& r : j.at("reactions")) {
      Reaction rx;
      rx.substrates = r.at("substrates").get<std::vector<int>>();
      rx.products = r.at("products").get<std::vector<int>>();
      if (r.at("rate").is_array()) rx.rate = r.at("rate").get<std::vector<double>>();
      else rx.rate.assign(static_cast<std::size_t>(actions), r.at("rate").get<double>());
      reactions.push_back(std::move(rx));
    }
    return CrnModel(species, actions, std::move(reactions));
  }
  if (kind == "queue") {
    return QueueModel(j.at("buffers").get<std::vector<int>>(), j.at("servers").get<std::vector<int>>(),
                      j.at("base_rates").get<Matrix>(), j.at("routing").get<std::vector<Matrix>>());
  }
  throw Error(ErrorKind::config, "model.kind must be 'crn' or 'queue'");
}

inline ObsConfig parse_observation(const json& j, int dims) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "full") return ObsFull{};
  const auto observed = j.at("observed").get<std::vector<int>>();
  if (kind == "noisy") {
    ObsConfigD d;
    d.period = j.at("period").get<double>();
    d.noise_var = j.at("noise_var").get<double>();
    d.mask.assign(static_cast<std::size_t>(dims), false);
    for (int i : observed) {
      require(i >= 0 && i < dims, ErrorKind::config, "observation: component index out of range");
      d.mask[static_cast<std::size_t>(i)] = true;
    }
    d.validate(dims);
    return d;
  }
  if (kind == "subsystem") {
    ObsConfigC c{observed};
    c.validate(dims);
    return c;
  }
  throw Error(ErrorKind::config, "observation.kind must be 'full', 'noisy' or 'subsystem'");
}

inline PolicySpec parse_policy(const json& j) {
  PolicySpec p;
  p.kind = parse_policy_kind(j.at("kind").get<std::string>());
  p.samples = get_or(j, "samples", 20);
  p.action = get_or(j, "action", 0);
  require(p.samples >= 1, ErrorKind::config, "policy.samples must be >= 1");
  return p;
}

}  // namespace detail

/// Checks that filter, observation model and model kind fit together.
inline void validate_filter(FilterKind kind, const ExperimentConfig& cfg) {
  const bool noisy = std::holds_alternative<ObsConfigD>(cfg.observation);
  const bool sub = std::holds_alternative<ObsConfigC>(cfg.observation);
  switch (kind) {
    case FilterKind::none: return;
    case FilterKind::exact:
      require(noisy || sub, ErrorKind::config, "exact filter needs a noisy or subsystem observation model");
      require(cfg.filter.box.has_value() || cfg.model.is_queue(), ErrorKind::config,
              "exact filter needs filter.box for unbounded models");
      return;
    case FilterKind::binomial:
      require(cfg.model.is_queue() && noisy, ErrorKind::config, "binomial filter needs a queue model and noisy observations");
      return;
    case FilterKind::poisson:
      require(cfg.model.is_crn() && noisy, ErrorKind::config, "poisson filter needs a CRN and noisy observations");
      return;
    case FilterKind::multinomial:
      require(cfg.model.is_crn() && sub && cfg.model.crn().closed(), ErrorKind::config,
              "multinomial filter needs a closed CRN with subsystem observations");
      return;
    case FilterKind::particle:
      require(noisy, ErrorKind::config, "particle filter needs noisy observations");
      return;
  }
}

inline ExperimentConfig parse_config(const json& j) {
  try {
    ExperimentConfig cfg;
    cfg.raw = j;
    cfg.name = detail::get_or<std::string>(j, "name", "experiment");
    cfg.model = detail::parse_model(j.at("model"));
    const int dims = cfg.model.dims();
    const json& r = j.at("reward");
    cfg.reward.target = r.at("target").get<std::vector<double>>();
    cfg.reward.scale = r.at("scale").get<double>();
    cfg.reward.discount = r.at("discount").get<double>();
    cfg.reward.validate(dims);
    cfg.observation = detail::parse_observation(j.at("observation"), dims);
    cfg.initial_state = j.at("initial_state").get<State>();
    require(cfg.model.contains(cfg.initial_state), ErrorKind::config, "initial_state is outside the model");

    if (j.contains("filter")) {
      const json& f = j.at("filter");
      cfg.filter.kind = parse_filter_kind(f.at("kind").get<std::string>());
      if (f.contains("box")) cfg.filter.box = detail::parse_box(f.at("box"));
      cfg.filter.particles = detail::get_or<std::size_t>(f, "particles", 10000);
    }
    if (j.contains("policy")) cfg.policy = detail::parse_policy(j.at("policy"));
    else cfg.policy.kind = PolicyKind::constant;
    if (j.contains("solver")) {
      const json& s = j.at("solver");
      if (s.contains("box")) cfg.solver_box = detail::parse_box(s.at("box"));
      cfg.solver.tol = detail::get_or(s, "tol", 1e-8);
      cfg.solver.max_sweeps = detail::get_or<std::size_t>(s, "max_sweeps", 100000);
      const std::string scheme = detail::get_or<std::string>(s, "scheme", "gauss_seidel");
      require(scheme == "gauss_seidel" || scheme == "jacobi", ErrorKind::config, "solver.scheme must be gauss_seidel or jacobi");
      cfg.solver.scheme = scheme == "jacobi" ? SweepScheme::jacobi : SweepScheme::gauss_seidel;
      if (s.contains("qtable")) cfg.qtable_path = s.at("qtable").get<std::string>();
    }
    if (j.contains("run")) {
      const json& rr = j.at("run");
      cfg.run.t_end = detail::get_or(rr, "t_end", 10.0);
      cfg.run.trajectories = detail::get_or<std::size_t>(rr, "trajectories", 1);
      cfg.run.seed = detail::get_or<std::uint64_t>(rr, "seed", 1);
      cfg.run.control_period = detail::get_or(rr, "control_period", 0.0);
      cfg.run.report_step = detail::get_or(rr, "report_step", 0.1);
      cfg.run.write_events = detail::get_or(rr, "write_events", false);
      cfg.run.write_trajectories = detail::get_or(rr, "write_trajectories", true);
      require(cfg.run.t_end > 0.0, ErrorKind::config, "run.t_end must be positive");
      require(cfg.run.trajectories >= 1, ErrorKind::config, "run.trajectories must be >= 1");
      require(cfg.run.report_step > 0.0, ErrorKind::config, "run.report_step must be positive");
    }
    if (j.contains("advantage")) {
      const json& a = j.at("advantage");
      AdvantageSpec spec{a.at("lower").get<std::vector<double>>(), a.at("upper").get<std::vector<double>>(),
                         a.at("steps").get<std::vector<int>>()};
      require(spec.lower.size() == static_cast<std::size_t>(dims) && spec.upper.size() == spec.lower.size() &&
                  spec.steps.size() == spec.lower.size(),
              ErrorKind::config, "advantage: lower/upper/steps must have one entry per dimension");
      for (int s : spec.steps) require(s >= 1, ErrorKind::config, "advantage.steps must be >= 1");
      cfg.advantage = spec;
    }
    if (j.contains("compare")) {
      for (const json& a : j.at("compare")) {
        CompareArm arm;
        arm.label = a.at("label").get<std::string>();
        arm.filter = parse_filter_kind(detail::get_or<std::string>(a, "filter", "none"));
        arm.policy = detail::parse_policy(a.at("policy"));
        cfg.compare.push_back(std::move(arm));
      }
    }

    validate_filter(cfg.filter.kind, cfg);
    for (const CompareArm& a : cfg.compare) validate_filter(a.filter, cfg);
    auto check_pair = [](FilterKind f, const PolicySpec& p) {
      require(f != FilterKind::particle || p.kind == PolicyKind::constant, ErrorKind::config,
              "particle filter is a filtering comparator only; use it with a constant policy");
      require(f != FilterKind::none || p.kind == PolicyKind::constant || p.kind == PolicyKind::fully_observed,
              ErrorKind::config, "belief policies need a filter");
    };
    check_pair(cfg.filter.kind, cfg.policy);
    for (const CompareArm& a : cfg.compare) check_pair(a.filter, a.policy);
    const bool needs_q = cfg.policy.kind != PolicyKind::constant ||
                         std::any_of(cfg.compare.begin(), cfg.compare.end(),
                                     [](const CompareArm& a) { return a.policy.kind != PolicyKind::constant; });
    if (needs_q && !cfg.qtable_path)
      require(cfg.solver_box.has_value() || cfg.model.is_queue(), ErrorKind::config,
              "solver.box is required for unbounded models");
    if (cfg.solver_box)
      require(cfg.solver_box->dims() == dims, ErrorKind::config, "solver.box dimension mismatch");
    if (cfg.filter.box) require(cfg.filter.box->dims() == dims, ErrorKind::config, "filter.box dimension mismatch");
    return cfg;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::config, std::string("config: ") + e.what());
  }
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::config, "config " + path + ": " + e.what());
  }
  return parse_config(j);
}

/// Box used for the Q table: the configured one, or the full space of a
/// bounded model.
inline StateBox solver_box(const ExperimentConfig& cfg) {
  return cfg.solver_box ? *cfg.solver_box : StateBox::full(cfg.model);
}

inline StateBox filter_box(const ExperimentConfig& cfg) {
  return cfg.filter.box ? *cfg.filter.box : StateBox::full(cfg.model);
}

}  // namespace ctpomdp
