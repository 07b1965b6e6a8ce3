#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "ctpomdp/error.hpp"

namespace ctpomdp {

/// Count vector of a controlled jump process (queue lengths, copy numbers).
using State = std::vector<int>;
/// Action index in {0, ..., m-1}.
using Action = int;
using Matrix = std::vector<std::vector<double>>;

struct Transition {
  std::vector<int> change;
  double rate = 0.0;
};

/// Binomial coefficient C(x, s) as a double; zero when x < s.
inline double choose(int x, int s) {
  if (s < 0 || x < s) return 0.0;
  double r = 1.0;
  for (int k = 0; k < s; ++k) r *= static_cast<double>(x - k) / static_cast<double>(k + 1);
  return r;
}

/// One mass-action reaction. `rate[u]` is the rate coefficient under action u.
struct Reaction {
  std::vector<int> substrates;
  std::vector<int> products;
  std::vector<double> rate;

  std::vector<int> change() const {
    std::vector<int> v(substrates.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = products[i] - substrates[i];
    return v;
  }

  int order() const { return std::accumulate(substrates.begin(), substrates.end(), 0); }
};

/// Chemical reaction network with mass-action kinetics and action-dependent
/// rate coefficients.
class CrnModel {
 public:
  CrnModel() = default;
  CrnModel(int species, int actions, std::vector<Reaction> reactions)
      : species_(species), actions_(actions), reactions_(std::move(reactions)) {
    require(species_ > 0, ErrorKind::config, "crn: need at least one species");
    require(actions_ > 0, ErrorKind::config, "crn: need at least one action");
    for (std::size_t j = 0; j < reactions_.size(); ++j) {
      const Reaction& r = reactions_[j];
      const std::string tag = "crn: reaction " + std::to_string(j);
      require(static_cast<int>(r.substrates.size()) == species_ &&
                  static_cast<int>(r.products.size()) == species_,
              ErrorKind::config, tag + " has wrong stoichiometry length");
      require(static_cast<int>(r.rate.size()) == actions_, ErrorKind::config,
              tag + " needs one rate per action");
      for (int s : r.substrates) require(s >= 0, ErrorKind::config, tag + " negative substrate");
      for (int p : r.products) require(p >= 0, ErrorKind::config, tag + " negative product");
      for (double c : r.rate) require(c >= 0.0, ErrorKind::config, tag + " negative rate");
      changes_.push_back(r.change());
    }
  }

  int species() const { return species_; }
  int actions() const { return actions_; }
  const std::vector<Reaction>& reactions() const { return reactions_; }
  const std::vector<int>& change(std::size_t j) const { return changes_[j]; }

  /// lambda_j(x, u) = c_j(u) prod_i C(x_i, S_ij)
  double propensity(const State& x, Action u, std::size_t j) const {
    const Reaction& r = reactions_[j];
    double a = r.rate[static_cast<std::size_t>(u)];
    if (a == 0.0) return 0.0;
    for (int i = 0; i < species_; ++i) {
      const int s = r.substrates[static_cast<std::size_t>(i)];
      if (s == 0) continue;
      a *= choose(x[static_cast<std::size_t>(i)], s);
      if (a == 0.0) return 0.0;
    }
    return a;
  }

  /// True when every reaction preserves the total copy number.
  bool closed() const {
    return std::all_of(changes_.begin(), changes_.end(), [](const std::vector<int>& v) {
      return std::accumulate(v.begin(), v.end(), 0) == 0;
    });
  }

 private:
  int species_ = 0;
  int actions_ = 0;
  std::vector<Reaction> reactions_;
  std::vector<std::vector<int>> changes_;
};

/// Network of finite-buffer M/M/c queues. Endpoint index `queues()` stands for
/// the environment: rows of that index are external arrivals, columns are
/// departures from the network.
class QueueModel {
 public:
  QueueModel() = default;
  QueueModel(std::vector<int> buffers, std::vector<int> servers, Matrix base_rates,
             std::vector<Matrix> routing)
      : buffers_(std::move(buffers)),
        servers_(std::move(servers)),
        base_rates_(std::move(base_rates)),
        routing_(std::move(routing)) {
    const std::size_t n = buffers_.size();
    require(n > 0, ErrorKind::config, "queue: need at least one queue");
    require(servers_.size() == n, ErrorKind::config, "queue: servers length mismatch");
    for (int b : buffers_) require(b > 0, ErrorKind::config, "queue: buffer sizes must be positive");
    for (int c : servers_) require(c > 0, ErrorKind::config, "queue: server counts must be positive");
    require(!routing_.empty(), ErrorKind::config, "queue: need at least one routing matrix");
    check_square(base_rates_, n + 1, "base_rates");
    for (const double r : flatten(base_rates_))
      require(r >= 0.0, ErrorKind::config, "queue: negative base rate");
    for (std::size_t u = 0; u < routing_.size(); ++u) {
      check_square(routing_[u], n + 1, "routing");
      for (std::size_t i = 0; i <= n; ++i) {
        double row = 0.0;
        for (double p : routing_[u][i]) {
          require(p >= 0.0, ErrorKind::config, "queue: negative routing probability");
          row += p;
        }
        // The environment row holds arrival switches and may exceed one.
        if (i < n)
          require(row <= 1.0 + 1e-12, ErrorKind::config,
                  "queue: routing row " + std::to_string(i) + " sums above one for action " +
                      std::to_string(u));
      }
    }
    for (std::size_t i = 0; i <= n; ++i)
      for (std::size_t j = 0; j <= n; ++j) {
        if (i == j || base_rates_[i][j] == 0.0) continue;
        bool used = false;
        for (const Matrix& p : routing_) used = used || p[i][j] > 0.0;
        if (!used) continue;
        std::vector<int> v(n, 0);
        if (j < n) v[j] += 1;
        if (i < n) v[i] -= 1;
        routes_.push_back({static_cast<int>(i), static_cast<int>(j)});
        changes_.push_back(std::move(v));
      }
  }

  int queues() const { return static_cast<int>(buffers_.size()); }
  int actions() const { return static_cast<int>(routing_.size()); }
  const std::vector<int>& buffers() const { return buffers_; }
  const std::vector<int>& servers() const { return servers_; }
  const Matrix& base_rates() const { return base_rates_; }
  const Matrix& routing(Action u) const { return routing_[static_cast<std::size_t>(u)]; }

  /// lambda_ij(x) = base_ij P_ij(u) min(x_i, c_i), with x_env = c_env = 1.
  /// Zero when the source is empty or the destination buffer is full.
  double rate(const State& x, Action u, int from, int to) const {
    const int n = queues();
    const double base = base_rates_[static_cast<std::size_t>(from)][static_cast<std::size_t>(to)] *
                        routing_[static_cast<std::size_t>(u)][static_cast<std::size_t>(from)]
                                [static_cast<std::size_t>(to)];
    if (base == 0.0 || from == to) return 0.0;
    if (to < n && x[static_cast<std::size_t>(to)] >= buffers_[static_cast<std::size_t>(to)])
      return 0.0;
    if (from == n) return base;
    return base * std::min(x[static_cast<std::size_t>(from)], servers_[static_cast<std::size_t>(from)]);
  }

  std::size_t routes() const { return routes_.size(); }
  std::pair<int, int> route(std::size_t k) const { return routes_[k]; }
  const std::vector<int>& change(std::size_t k) const { return changes_[k]; }

  /// Upper bound on the total exit rate: sum_ij base_ij c_i.
  double max_exit_rate() const {
    double total = 0.0;
    const int n = queues();
    for (int i = 0; i <= n; ++i)
      for (int j = 0; j <= n; ++j) {
        if (i == j) continue;
        const double c = i < n ? servers_[static_cast<std::size_t>(i)] : 1.0;
        total += base_rates_[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] * c;
      }
    return total;
  }

 private:
  static std::vector<double> flatten(const Matrix& m) {
    std::vector<double> out;
    for (const auto& row : m) out.insert(out.end(), row.begin(), row.end());
    return out;
  }

  static void check_square(const Matrix& m, std::size_t n, const char* name) {
    require(m.size() == n, ErrorKind::config, std::string("queue: ") + name + " must be (n+1)x(n+1)");
    for (const auto& row : m)
      require(row.size() == n, ErrorKind::config,
              std::string("queue: ") + name + " must be (n+1)x(n+1)");
  }

  std::vector<int> buffers_;
  std::vector<int> servers_;
  Matrix base_rates_;
  std::vector<Matrix> routing_;
  std::vector<std::pair<int, int>> routes_;
  std::vector<std::vector<int>> changes_;
};

/// Uniform view of a controlled CTMC as a fixed list of jump channels, each
/// with a constant change vector and a state/action dependent rate. Blocked
/// channels (full buffers) report rate zero and are never enumerated.
class Model {
 public:
  Model() = default;
  Model(CrnModel crn) : impl_(std::move(crn)) {}      // NOLINT(google-explicit-constructor)
  Model(QueueModel queue) : impl_(std::move(queue)) {}  // NOLINT(google-explicit-constructor)

  bool is_crn() const { return std::holds_alternative<CrnModel>(impl_); }
  bool is_queue() const { return std::holds_alternative<QueueModel>(impl_); }
  const CrnModel& crn() const { return std::get<CrnModel>(impl_); }
  const QueueModel& queue() const { return std::get<QueueModel>(impl_); }

  int dims() const {
    return is_crn() ? crn().species() : queue().queues();
  }
  int actions() const { return is_crn() ? crn().actions() : queue().actions(); }

  std::size_t channels() const {
    return is_crn() ? crn().reactions().size() : queue().routes();
  }

  const std::vector<int>& channel_change(std::size_t k) const {
    return is_crn() ? crn().change(k) : queue().change(k);
  }

  double channel_rate(const State& x, Action u, std::size_t k) const {
    if (is_crn()) return crn().propensity(x, u, k);
    const auto [from, to] = queue().route(k);
    return queue().rate(x, u, from, to);
  }

  /// Per-dimension upper limit of the state space, -1 when unbounded.
  std::vector<int> caps() const {
    if (is_queue()) return queue().buffers();
    return std::vector<int>(static_cast<std::size_t>(dims()), -1);
  }

  bool contains(const State& x) const {
    if (static_cast<int>(x.size()) != dims()) return false;
    const std::vector<int> cap = caps();
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] < 0) return false;
      if (cap[i] >= 0 && x[i] > cap[i]) return false;
    }
    return true;
  }

  /// Calls f(change, rate) for every channel with positive rate at (x, u).
  template <class F>
  void for_each_transition(const State& x, Action u, F&& f) const {
    const std::size_t k = channels();
    for (std::size_t c = 0; c < k; ++c) {
      const double r = channel_rate(x, u, c);
      if (r > 0.0) f(channel_change(c), r);
    }
  }

  std::vector<Transition> enumerate_transitions(const State& x, Action u) const {
    std::vector<Transition> out;
    for_each_transition(x, u, [&](const std::vector<int>& v, double r) { out.push_back({v, r}); });
    return out;
  }

  double exit_rate(const State& x, Action u) const {
    double total = 0.0;
    for_each_transition(x, u, [&](const std::vector<int>&, double r) { total += r; });
    return total;
  }

 private:
  std::variant<CrnModel, QueueModel> impl_;
};

/// R(x, u) = -(1/n) sum_i ((x_i - target_i) / scale)^2 with discount time
/// constant `discount`.
struct RewardSpec {
  std::vector<double> target;
  double scale = 1.0;
  double discount = 1.0;

  void validate(int dims) const {
    require(static_cast<int>(target.size()) == dims, ErrorKind::config,
            "reward: target length must match the model dimension");
    require(scale > 0.0, ErrorKind::config, "reward: scale must be positive");
    require(discount > 0.0, ErrorKind::config, "reward: discount must be positive");
  }

  double operator()(const State& x, Action /*u*/) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
      const double d = (static_cast<double>(x[i]) - target[i]) / scale;
      acc += d * d;
    }
    return -acc / static_cast<double>(target.size());
  }
};

inline double reward(const RewardSpec& spec, const State& x, Action u) { return spec(x, u); }

}  // namespace ctpomdp
