#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ctpomdp/belief.hpp"
#include "ctpomdp/error.hpp"
#include "ctpomdp/exact_filter.hpp"
#include "ctpomdp/mdp_solver.hpp"
#include "ctpomdp/particle_filter.hpp"
#include "ctpomdp/policy.hpp"
#include "ctpomdp/projection_filter.hpp"
#include "ctpomdp/simulate.hpp"

namespace ctpomdp {

enum class PolicyKind { qmdp_mc, qmdp_exact, fully_observed, constant };

struct PolicySpec {
  PolicyKind kind = PolicyKind::qmdp_mc;
  int samples = 20;
  Action action = 0;  // for constant
};

inline const char* to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::qmdp_mc: return "qmdp_mc";
    case PolicyKind::qmdp_exact: return "qmdp_exact";
    case PolicyKind::fully_observed: return "fully_observed";
    case PolicyKind::constant: return "constant";
  }
  return "unknown";
}

/// Running filter with its own clock. advance() predicts up to t under the
/// action that was in effect; observe()/observe_jump() apply the update at
/// the current time.
class Filter {
 public:
  virtual ~Filter() = default;
  virtual std::string name() const = 0;
  virtual void advance(double t, Action u) = 0;
  virtual void observe(std::span<const double> /*y*/, Action /*u*/) {
    throw Error(ErrorKind::config, name() + " filter does not accept noisy observations");
  }
  virtual void observe_jump(std::span<const int> /*y_new*/, Action /*u*/) {
    throw Error(ErrorKind::config, name() + " filter does not accept sub-system observations");
  }
  virtual std::vector<double> mean() const = 0;
  virtual std::vector<double> variance() const = 0;
  virtual Action decide(const QTable& table, const PolicySpec& spec, Rng& rng) const = 0;

  double time() const { return t_; }

 protected:
  /// Returns the horizon to the new time, rejecting time reversal.
  double step_to(double t) {
    require(t >= t_ - 1e-12, ErrorKind::invalid_argument, name() + " filter: time went backwards");
    const double h = std::max(0.0, t - t_);
    t_ = std::max(t, t_);
    return h;
  }

  double t_ = 0.0;
};

namespace detail {

template <class Belief>
Action decide_with(const QTable& table, const Belief& belief, const PolicySpec& spec, Rng& rng) {
  switch (spec.kind) {
    case PolicyKind::qmdp_mc: return qmdp_action_mc(table, belief, spec.samples, rng);
    case PolicyKind::qmdp_exact: return qmdp_exact(table, belief);
    case PolicyKind::constant: return spec.action;
    case PolicyKind::fully_observed: break;
  }
  throw Error(ErrorKind::config, "filter policy: fully_observed needs the state, not a belief");
}

}  // namespace detail

class ExactFilterD final : public Filter {
 public:
  ExactFilterD(const Model& model, StateBox box, const State& x0, ObsConfigD obs)
      : model_(model), gen_(model, box), belief_(DenseBelief::point_mass(std::move(box), x0)), obs_(std::move(obs)) {}

  std::string name() const override { return "exact"; }
  void advance(double t, Action u) override {
    const double h = step_to(t);
    if (h == 0.0) return;
    belief_ = predict_D(gen_, u, std::move(belief_), h);
    check_truncation(belief_, model_, 1e-3, t_);
  }
  void observe(std::span<const double> y, Action) override {
    belief_ = update_D(std::move(belief_), y, obs_.mask, obs_.noise_var);
  }
  std::vector<double> mean() const override { return belief_.mean(); }
  std::vector<double> variance() const override { return belief_.variance(); }
  Action decide(const QTable& table, const PolicySpec& spec, Rng& rng) const override {
    return detail::decide_with(table, belief_, spec, rng);
  }
  const DenseBelief& belief() const { return belief_; }

 private:
  const Model& model_;
  BoxGenerator gen_;
  DenseBelief belief_;
  ObsConfigD obs_;
};

class ExactFilterC final : public Filter {
 public:
  ExactFilterC(const Model& model, StateBox box, const State& x0, ObsConfigC obs)
      : model_(model),
        gen_(model, box),
        belief_(DenseBelief::point_mass(std::move(box), x0)),
        obs_(std::move(obs)),
        y_(obs_.project(x0)) {}

  std::string name() const override { return "exact"; }
  void advance(double t, Action u) override {
    const double h = step_to(t);
    if (h == 0.0) return;
    belief_ = predict_C(gen_, u, std::move(belief_), obs_.observed, y_, h);
    check_truncation(belief_, model_, 1e-3, t_);
  }
  void observe_jump(std::span<const int> y_new, Action u) override {
    belief_ = update_C(gen_, u, belief_, obs_.observed, y_new);
    y_.assign(y_new.begin(), y_new.end());
  }
  std::vector<double> mean() const override { return belief_.mean(); }
  std::vector<double> variance() const override { return belief_.variance(); }
  Action decide(const QTable& table, const PolicySpec& spec, Rng& rng) const override {
    return detail::decide_with(table, belief_, spec, rng);
  }
  const DenseBelief& belief() const { return belief_; }

 private:
  const Model& model_;
  BoxGenerator gen_;
  DenseBelief belief_;
  ObsConfigC obs_;
  std::vector<int> y_;
};

class BinomialFilter final : public Filter {
 public:
  BinomialFilter(const QueueModel& model, const State& x0, ObsConfigD obs)
      : model_(model), belief_(BinomialBelief::from_state(x0, model.buffers())), obs_(std::move(obs)) {}

  std::string name() const override { return "binomial"; }
  void advance(double t, Action u) override {
    const double h = step_to(t);
    if (h > 0.0) belief_ = integrate_belief(model_, u, std::move(belief_), h);
  }
  void observe(std::span<const double> y, Action) override {
    belief_ = gaussian_mm_update_binomial(std::move(belief_), y, obs_.noise_var, obs_.mask);
  }
  std::vector<double> mean() const override { return belief_.mean(); }
  std::vector<double> variance() const override { return belief_.variance(); }
  Action decide(const QTable& table, const PolicySpec& spec, Rng& rng) const override {
    return detail::decide_with(table, belief_, spec, rng);
  }
  const BinomialBelief& belief() const { return belief_; }

 private:
  const QueueModel& model_;
  BinomialBelief belief_;
  ObsConfigD obs_;
};

class PoissonFilter final : public Filter {
 public:
  PoissonFilter(const CrnModel& model, const State& x0, ObsConfigD obs)
      : model_(model), belief_(PoissonBelief::from_state(x0)), obs_(std::move(obs)) {}

  std::string name() const override { return "poisson"; }
  void advance(double t, Action u) override {
    const double h = step_to(t);
    if (h > 0.0) belief_ = integrate_belief(model_, u, std::move(belief_), h);
  }
  void observe(std::span<const double> y, Action) override {
    belief_ = gaussian_mm_update_poisson(std::move(belief_), y, obs_.noise_var, obs_.mask);
  }
  std::vector<double> mean() const override { return belief_.mean(); }
  std::vector<double> variance() const override { return belief_.variance(); }
  Action decide(const QTable& table, const PolicySpec& spec, Rng& rng) const override {
    return detail::decide_with(table, belief_, spec, rng);
  }
  const PoissonBelief& belief() const { return belief_; }

 private:
  const CrnModel& model_;
  PoissonBelief belief_;
  ObsConfigD obs_;
};

class MultinomialFilter final : public Filter {
 public:
  MultinomialFilter(const CrnModel& model, const State& x0, ObsConfigC obs)
      : model_(model), obs_(std::move(obs)) {
    require(model.closed(), ErrorKind::config, "multinomial filter needs a closed reaction network");
    int total = 0;
    for (int v : x0) total += v;
    belief_ = MultinomialBelief::uniform(obs_.latent(model.species()), obs_.observed, obs_.project(x0), total);
  }

  std::string name() const override { return "multinomial"; }
  void advance(double t, Action u) override {
    const double h = step_to(t);
    if (h > 0.0) belief_ = integrate_belief(model_, u, std::move(belief_), h);
  }
  void observe_jump(std::span<const int> y_new, Action u) override {
    std::vector<int> change(y_new.size());
    for (std::size_t k = 0; k < change.size(); ++k) change[k] = y_new[k] - belief_.y[k];
    belief_ = multinomial_jump_update(model_, u, belief_, change);
  }
  std::vector<double> mean() const override { return belief_.mean(); }
  std::vector<double> variance() const override { return belief_.variance(); }
  Action decide(const QTable& table, const PolicySpec& spec, Rng& rng) const override {
    return detail::decide_with(table, belief_, spec, rng);
  }
  const MultinomialBelief& belief() const { return belief_; }

 private:
  const CrnModel& model_;
  MultinomialBelief belief_;
  ObsConfigC obs_;
};

class ParticleFilter final : public Filter {
 public:
  ParticleFilter(const Model& model, const State& x0, std::size_t particles, ObsConfigD obs, std::uint64_t seed)
      : model_(model), set_(ParticleSet::replicate(x0, particles)), obs_(std::move(obs)), seed_(seed),
        resample_rng_(derive_seed(seed, {stream_particles, 0xffffffffULL})) {}

  std::string name() const override { return "particle"; }
  void advance(double t, Action u) override {
    const double h = step_to(t);
    if (h > 0.0) set_ = pf_predict(model_, u, std::move(set_), h, derive_seed(seed_, {steps_++}));
  }
  void observe(std::span<const double> y, Action) override {
    set_ = pf_update(std::move(set_), y, obs_.noise_var, obs_.mask, resample_rng_);
  }
  std::vector<double> mean() const override { return set_.mean(); }
  std::vector<double> variance() const override { return set_.variance(); }
  Action decide(const QTable& table, const PolicySpec& spec, Rng& rng) const override {
    return detail::decide_with(table, set_, spec, rng);
  }
  const ParticleSet& particles() const { return set_; }

 private:
  const Model& model_;
  ParticleSet set_;
  ObsConfigD obs_;
  std::uint64_t seed_;
  std::uint64_t steps_ = 0;
  Rng resample_rng_;
};

/// One row of a filter dump.
struct FilterSample {
  double t;
  std::vector<double> mean;
  std::vector<double> variance;
  Action u;
};

/// QMDP controller over a running filter.
class BeliefController final : public Controller {
 public:
  BeliefController(std::unique_ptr<Filter> filter, const QTable* table, PolicySpec spec, std::uint64_t seed,
                   bool record = false)
      : filter_(std::move(filter)), table_(table), spec_(spec), rng_(seed), record_(record) {
    require(spec_.kind == PolicyKind::constant || table_ != nullptr, ErrorKind::config,
            "belief controller: QMDP policy needs a Q table");
  }

  void on_observation(double t, std::span<const double> y) override {
    filter_->advance(t, u_);
    filter_->observe(y, u_);
  }
  void on_observed_jump(double t, std::span<const int> y_new) override {
    filter_->advance(t, u_);
    filter_->observe_jump(y_new, u_);
  }
  Action act(double t) override {
    filter_->advance(t, u_);
    u_ = filter_->decide(*table_, spec_, rng_);
    if (record_) samples_.push_back({t, filter_->mean(), filter_->variance(), u_});
    return u_;
  }

  const Filter& filter() const { return *filter_; }
  const std::vector<FilterSample>& samples() const { return samples_; }

 private:
  std::unique_ptr<Filter> filter_;
  const QTable* table_;
  PolicySpec spec_;
  Rng rng_;
  bool record_;
  Action u_ = 0;
  std::vector<FilterSample> samples_;
};

/// Optimal MDP controller acting on the true state.
class FullyObservedController final : public Controller {
 public:
  explicit FullyObservedController(const QTable& table) : table_(table) {}
  bool observes_state() const override { return true; }
  void on_state(double, const State& x) override { x_ = x; }
  Action act(double) override { return table_.greedy_at(table_.slot(x_)); }

 private:
  const QTable& table_;
  State x_;
};

/// Re-runs a filter along a recorded trajectory (using its observations and
/// actions) and samples it on the grid {0, dt, ..., t_end}.
inline std::vector<FilterSample> replay_filter(Filter& filter, const Trajectory& traj, double dt) {
  require(dt > 0.0, ErrorKind::invalid_argument, "replay_filter: report step must be positive");
  std::vector<FilterSample> out;
  Action u = 0;
  std::size_t next = 0;
  const std::size_t steps = static_cast<std::size_t>(std::floor(traj.t_end / dt + 1e-9));
  for (std::size_t k = 0; k <= steps; ++k) {
    const double t = k * dt;
    while (next < traj.events.size() && traj.events[next].t <= t) {
      const TrajectoryEvent& e = traj.events[next++];
      switch (e.kind) {
        case EventKind::control_switch:
          filter.advance(e.t, u);
          u = e.u;
          break;
        case EventKind::observation_D:
          filter.advance(e.t, u);
          filter.observe(e.y, u);
          break;
        case EventKind::observation_C:
          filter.advance(e.t, u);
          filter.observe_jump(e.yc, u);
          break;
        case EventKind::state_jump: break;
      }
    }
    filter.advance(t, u);
    out.push_back({t, filter.mean(), filter.variance(), u});
  }
  return out;
}

/// True state on the same grid as replay_filter.
inline std::vector<State> sample_states(const Trajectory& traj, double dt) {
  std::vector<State> out;
  State x;
  std::size_t next = 0;
  const std::size_t steps = static_cast<std::size_t>(std::floor(traj.t_end / dt + 1e-9));
  for (std::size_t k = 0; k <= steps; ++k) {
    const double t = k * dt;
    while (next < traj.events.size() && traj.events[next].t <= t) {
      if (traj.events[next].kind == EventKind::state_jump) x = traj.events[next].x;
      ++next;
    }
    out.push_back(x);
  }
  return out;
}

inline void write_filter_csv(const std::vector<FilterSample>& samples, const std::string& path) {
  CsvWriter csv(path);
  const std::size_t n = samples.empty() ? 0 : samples[0].mean.size();
  std::vector<std::string> header{"t"};
  for (const auto& s : indexed_names("mean_", n)) header.push_back(s);
  for (const auto& s : indexed_names("var_", n)) header.push_back(s);
  header.push_back("u");
  csv.header(header);
  for (const FilterSample& f : samples) {
    std::vector<double> row{f.t};
    row.insert(row.end(), f.mean.begin(), f.mean.end());
    row.insert(row.end(), f.variance.begin(), f.variance.end());
    row.push_back(f.u);
    csv.row(row);
  }
}

}  // namespace ctpomdp
