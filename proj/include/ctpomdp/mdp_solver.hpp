#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ctpomdp/error.hpp"
#include "ctpomdp/io.hpp"
#include "ctpomdp/model.hpp"
#include "ctpomdp/state_box.hpp"

namespace ctpomdp {

enum class SweepScheme { gauss_seidel, jacobi };

struct SolverOptions {
  double tol = 1e-8;
  std::size_t max_sweeps = 100000;
  SweepScheme scheme = SweepScheme::gauss_seidel;
  /// Called after each sweep with (sweep, residual); for progress and tests.
  std::function<void(std::size_t, double)> on_sweep;
};

/// State-action values over a box. Row-major: q[s * actions + u].
class QTable {
 public:
  QTable() = default;
  QTable(StateBox box, int actions)
      : box_(std::move(box)), actions_(actions), q_(box_.size() * static_cast<std::size_t>(actions), 0.0) {}

  const StateBox& box() const { return box_; }
  int actions() const { return actions_; }
  const std::vector<double>& data() const { return q_; }
  std::vector<double>& data() { return q_; }

  double& at(std::size_t s, Action u) { return q_[s * static_cast<std::size_t>(actions_) + static_cast<std::size_t>(u)]; }
  double at(std::size_t s, Action u) const {
    return q_[s * static_cast<std::size_t>(actions_) + static_cast<std::size_t>(u)];
  }

  double value_at(std::size_t s) const {
    double v = at(s, 0);
    for (Action u = 1; u < actions_; ++u) v = std::max(v, at(s, u));
    return v;
  }

  /// Lowest-index maximizer.
  Action greedy_at(std::size_t s) const {
    Action best = 0;
    for (Action u = 1; u < actions_; ++u)
      if (at(s, u) > at(s, best)) best = u;
    return best;
  }

  /// Box slot of x, clamping out-of-box states to the nearest box state.
  /// `clamped` (optional) is set when clamping happened.
  std::size_t slot(const State& x, bool* clamped = nullptr) const {
    if (box_.contains(x)) {
      if (clamped) *clamped = false;
      return box_.index(x);
    }
    if (clamped) *clamped = true;
    return box_.index(box_.clamp(x));
  }

  double q(const State& x, Action u, bool* clamped = nullptr) const { return at(slot(x, clamped), u); }

  double residual = INFINITY;
  std::size_t sweeps = 0;
  bool converged = false;

 private:
  StateBox box_;
  int actions_ = 0;
  std::vector<double> q_;
};

/// V(x) = max_u Q(x, u); out-of-box x is clamped (flagged through `clamped`).
inline double value(const QTable& table, const State& x, bool* clamped = nullptr) {
  return table.value_at(table.slot(x, clamped));
}

/// A(x, u) = Q(x, u) - V(x) <= 0.
inline double advantage(const QTable& table, const State& x, Action u, bool* clamped = nullptr) {
  const std::size_t s = table.slot(x, clamped);
  return table.at(s, u) - table.value_at(s);
}

namespace detail {

/// (R + tau sum Lambda V(x')) / (1 + tau Lambda_exit) for one (s, u).
inline double bellman(const BoxGenerator& gen, double r, double tau, std::size_t s, Action u,
                      const std::vector<double>& v) {
  double acc = r;
  for (const auto* e = gen.begin(s, u); e != gen.end(s, u); ++e) acc += tau * e->rate * v[e->target];
  return acc / (1.0 + tau * gen.exit_rate(s, u));
}

inline std::vector<double> box_rewards(const BoxGenerator& gen, const RewardSpec& reward) {
  const StateBox& box = gen.box();
  const int m = gen.actions();
  std::vector<double> r(box.size() * static_cast<std::size_t>(m), 0.0);
  State x;
  for (std::size_t s = 0; s < box.size(); ++s) {
    if (!box.valid(s)) continue;
    box.decode(s, x);
    for (Action u = 0; u < m; ++u) r[s * static_cast<std::size_t>(m) + static_cast<std::size_t>(u)] = reward(x, u);
  }
  return r;
}

}  // namespace detail

/// Max over (s, u) of |T Q - Q| for the contraction operator T.
inline double bellman_residual(const BoxGenerator& gen, const RewardSpec& reward, const QTable& table) {
  const StateBox& box = gen.box();
  const int m = gen.actions();
  std::vector<double> v(box.size(), 0.0);
  for (std::size_t s = 0; s < box.size(); ++s)
    if (box.valid(s)) v[s] = table.value_at(s);
  const std::vector<double> r = detail::box_rewards(gen, reward);
  double res = 0.0;
  for (std::size_t s = 0; s < box.size(); ++s) {
    if (!box.valid(s)) continue;
    for (Action u = 0; u < m; ++u) {
      const double t = detail::bellman(gen, r[s * static_cast<std::size_t>(m) + static_cast<std::size_t>(u)],
                                       reward.discount, s, u, v);
      res = std::max(res, std::fabs(t - table.at(s, u)));
    }
  }
  return res;
}

/// Fixed-point iteration of Q(x,u) = (R + tau sum_x' Lambda(x,x',u) V(x')) /
/// (1 + tau Lambda(x,u)) on the box. Transitions leaving the box are dropped.
/// Stops once the Bellman residual is below tol or max_sweeps is reached
/// (then `converged` is false and `residual` reports the last residual).
inline QTable solve_q(const BoxGenerator& gen, const RewardSpec& reward, const SolverOptions& opt = {}) {
  require(opt.tol > 0.0, ErrorKind::invalid_argument, "solve_q: tol must be positive");
  const StateBox& box = gen.box();
  const int m = gen.actions();
  const double tau = reward.discount;
  QTable table(box, m);
  const std::vector<double> r = detail::box_rewards(gen, reward);
  std::vector<double> v(box.size(), 0.0), v_next;

  for (std::size_t sweep = 1; sweep <= opt.max_sweeps; ++sweep) {
    double change = 0.0;
    if (opt.scheme == SweepScheme::jacobi) v_next = v;
    std::vector<double>& target = opt.scheme == SweepScheme::jacobi ? v_next : v;
    for (std::size_t s = 0; s < box.size(); ++s) {
      if (!box.valid(s)) continue;
      double best = -INFINITY;
      for (Action u = 0; u < m; ++u) {
        const std::size_t k = s * static_cast<std::size_t>(m) + static_cast<std::size_t>(u);
        const double q = detail::bellman(gen, r[k], tau, s, u, v);
        change = std::max(change, std::fabs(q - table.data()[k]));
        table.data()[k] = q;
        best = std::max(best, q);
      }
      target[s] = best;
    }
    if (opt.scheme == SweepScheme::jacobi) v.swap(v_next);
    table.sweeps = sweep;
    // For Jacobi the sweep change is exactly the residual of the previous
    // iterate; for Gauss-Seidel it is only a proxy, so confirm before stopping.
    table.residual = change;
    if (opt.on_sweep) opt.on_sweep(sweep, change);
    if (change <= opt.tol) {
      table.residual = bellman_residual(gen, reward, table);
      if (table.residual <= opt.tol) {
        table.converged = true;
        break;
      }
    }
  }
  if (!table.converged && table.sweeps > 0) table.residual = bellman_residual(gen, reward, table);
  return table;
}

inline QTable solve_q(const Model& model, const RewardSpec& reward, const StateBox& box,
                      const SolverOptions& opt = {}) {
  reward.validate(model.dims());
  return solve_q(BoxGenerator(model, box), reward, opt);
}

/// Writes the table as CSV: a header line with the box bounds, then one row
/// per valid state (state coordinates followed by the Q values).
inline void save_qtable(const QTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot open " + path + " for writing");
  const StateBox& box = table.box();
  out << "# dims=" << box.dims() << " actions=" << table.actions() << " lower=";
  for (int i = 0; i < box.dims(); ++i) out << (i ? ";" : "") << box.lower()[static_cast<std::size_t>(i)];
  out << " upper=";
  for (int i = 0; i < box.dims(); ++i) out << (i ? ";" : "") << box.upper()[static_cast<std::size_t>(i)];
  out << " total=" << (box.total() ? std::to_string(*box.total()) : std::string("none"))
      << " residual=" << format_double(table.residual) << " sweeps=" << table.sweeps
      << " converged=" << (table.converged ? 1 : 0) << '\n';
  State x;
  for (std::size_t s = 0; s < box.size(); ++s) {
    if (!box.valid(s)) continue;
    box.decode(s, x);
    for (std::size_t i = 0; i < x.size(); ++i) out << (i ? "," : "") << x[i];
    for (Action u = 0; u < table.actions(); ++u) out << ',' << format_double(table.at(s, u));
    out << '\n';
  }
}

inline QTable load_qtable(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path);
  std::string line;
  std::getline(in, line);
  auto field = [&](const std::string& key) {
    const auto pos = line.find(key + "=");
    if (pos == std::string::npos) throw Error(ErrorKind::io, "qtable: missing header field " + key);
    const auto start = pos + key.size() + 1;
    return line.substr(start, line.find(' ', start) - start);
  };
  auto ints = [](const std::string& s) {
    std::vector<int> out;
    std::size_t start = 0;
    while (start <= s.size()) {
      const auto end = s.find(';', start);
      out.push_back(std::stoi(s.substr(start, end - start)));
      if (end == std::string::npos) break;
      start = end + 1;
    }
    return out;
  };
  try {
    const int actions = std::stoi(field("actions"));
    const std::string total = field("total");
    StateBox box(ints(field("lower")), ints(field("upper")),
                 total == "none" ? std::nullopt : std::optional<int>(std::stoi(total)));
    QTable table(box, actions);
    table.residual = std::stod(field("residual"));
    table.sweeps = std::stoul(field("sweeps"));
    table.converged = field("converged") == "1";
    State x(static_cast<std::size_t>(box.dims()));
    std::size_t rows = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::size_t start = 0;
      auto next = [&] {
        const auto end = line.find(',', start);
        std::string cell = line.substr(start, end - start);
        start = end == std::string::npos ? line.size() + 1 : end + 1;
        return cell;
      };
      for (auto& xi : x) xi = std::stoi(next());
      const auto s = box.find(x);
      if (!s) throw Error(ErrorKind::io, "qtable: row state outside the declared box");
      for (Action u = 0; u < actions; ++u) table.at(*s, u) = std::stod(next());
      ++rows;
    }
    if (rows != box.count()) throw Error(ErrorKind::io, "qtable: row count does not match the box");
    return table;
  } catch (const std::logic_error& e) {
    throw Error(ErrorKind::io, std::string("qtable: malformed file: ") + e.what());
  }
}

}  // namespace ctpomdp
