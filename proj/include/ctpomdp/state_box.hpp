#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ctpomdp/error.hpp"
#include "ctpomdp/model.hpp"

namespace ctpomdp {

/// Finite truncation of the state space: an inclusive per-dimension box,
/// optionally intersected with the hyperplane sum(x) == total (for closed
/// reaction networks). States are addressed by a dense row-major index over
/// the free coordinates; with a total constraint the last coordinate is
/// implied, and slots whose implied coordinate falls outside its bounds are
/// marked invalid.
class StateBox {
 public:
  StateBox() = default;
  StateBox(std::vector<int> lower, std::vector<int> upper, std::optional<int> total = std::nullopt)
      : lower_(std::move(lower)), upper_(std::move(upper)), total_(total) {
    require(!lower_.empty() && lower_.size() == upper_.size(), ErrorKind::config,
            "box: lower/upper bounds must be non-empty and of equal length");
    for (std::size_t i = 0; i < lower_.size(); ++i)
      require(0 <= lower_[i] && lower_[i] <= upper_[i], ErrorKind::config,
              "box: need 0 <= lower <= upper in dimension " + std::to_string(i));
    const std::size_t free = free_dims();
    require(free > 0 || !total_, ErrorKind::config, "box: total constraint needs >= 2 dimensions");
    strides_.assign(free, 1);
    size_ = 1;
    for (std::size_t i = free; i-- > 0;) {
      strides_[i] = size_;
      size_ *= static_cast<std::size_t>(upper_[i] - lower_[i] + 1);
    }
    if (total_) {
      valid_.assign(size_, 0);
      State x;
      for (std::size_t idx = 0; idx < size_; ++idx) {
        decode(idx, x);
        const int last = x.back();
        if (last >= lower_.back() && last <= upper_.back()) {
          valid_[idx] = 1;
          ++count_;
        }
      }
    } else {
      count_ = size_;
    }
  }

  /// Box spanning [0, cap_i] for a bounded model.
  static StateBox full(const Model& model) {
    const std::vector<int> caps = model.caps();
    for (int c : caps)
      require(c >= 0, ErrorKind::config, "box: model is unbounded, give explicit bounds");
    return StateBox(std::vector<int>(caps.size(), 0), caps);
  }

  int dims() const { return static_cast<int>(lower_.size()); }
  const std::vector<int>& lower() const { return lower_; }
  const std::vector<int>& upper() const { return upper_; }
  const std::optional<int>& total() const { return total_; }

  /// Number of index slots, including invalid ones.
  std::size_t size() const { return size_; }
  /// Number of valid states.
  std::size_t count() const { return count_; }
  bool valid(std::size_t idx) const { return !total_ || valid_[idx] != 0; }

  bool contains(const State& x) const {
    if (x.size() != lower_.size()) return false;
    int sum = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] < lower_[i] || x[i] > upper_[i]) return false;
      sum += x[i];
    }
    return !total_ || sum == *total_;
  }

  /// Index of a state known to be inside the box.
  std::size_t index(const State& x) const {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < strides_.size(); ++i)
      idx += static_cast<std::size_t>(x[i] - lower_[i]) * strides_[i];
    return idx;
  }

  std::optional<std::size_t> find(const State& x) const {
    if (!contains(x)) return std::nullopt;
    return index(x);
  }

  void decode(std::size_t idx, State& out) const {
    out.resize(lower_.size());
    int sum = 0;
    for (std::size_t i = 0; i < strides_.size(); ++i) {
      out[i] = lower_[i] + static_cast<int>(idx / strides_[i]);
      idx %= strides_[i];
      sum += out[i];
    }
    if (total_) out.back() = *total_ - sum;
  }

  State state(std::size_t idx) const {
    State x;
    decode(idx, x);
    return x;
  }

  /// Nearest box state under component-wise clamping. With a total
  /// constraint the remaining surplus or deficit is absorbed greedily from
  /// the last dimension backwards.
  State clamp(const State& x) const {
    State c(lower_.size());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = std::clamp(x[i], lower_[i], upper_[i]);
    if (total_) {
      int diff = *total_;
      for (int v : c) diff -= v;
      for (std::size_t i = c.size(); i-- > 0 && diff != 0;) {
        const int room = diff > 0 ? upper_[i] - c[i] : lower_[i] - c[i];
        const int step = diff > 0 ? std::min(diff, room) : std::max(diff, room);
        c[i] += step;
        diff -= step;
      }
      require(diff == 0, ErrorKind::invalid_argument, "box: total unreachable within bounds");
    }
    return c;
  }

  bool operator==(const StateBox& o) const {
    return lower_ == o.lower_ && upper_ == o.upper_ && total_ == o.total_;
  }

 private:
  std::size_t free_dims() const { return total_ ? lower_.size() - 1 : lower_.size(); }

  std::vector<int> lower_;
  std::vector<int> upper_;
  std::optional<int> total_;
  std::vector<std::size_t> strides_;
  std::vector<char> valid_;
  std::size_t size_ = 0;
  std::size_t count_ = 0;
};

/// Sparse generator of a model restricted to a box: for each (state, action)
/// the in-box targets and rates. Transitions leaving the box are dropped.
class BoxGenerator {
 public:
  struct Edge {
    std::size_t target;
    double rate;
  };

  BoxGenerator() = default;
  BoxGenerator(const Model& model, StateBox box) : box_(std::move(box)), actions_(model.actions()) {
    require(box_.dims() == model.dims(), ErrorKind::config, "box dimension does not match model");
    const std::size_t n = box_.size();
    offsets_.assign(n * static_cast<std::size_t>(actions_) + 1, 0);
    exit_.assign(n * static_cast<std::size_t>(actions_), 0.0);
    State x, y;
    for (std::size_t s = 0; s < n; ++s) {
      for (int u = 0; u < actions_; ++u) {
        const std::size_t slot = s * static_cast<std::size_t>(actions_) + static_cast<std::size_t>(u);
        if (box_.valid(s)) {
          box_.decode(s, x);
          model.for_each_transition(x, u, [&](const std::vector<int>& v, double r) {
            y = x;
            for (std::size_t i = 0; i < y.size(); ++i) y[i] += v[i];
            if (!box_.contains(y)) return;
            edges_.push_back({box_.index(y), r});
            exit_[slot] += r;
          });
        }
        offsets_[slot + 1] = edges_.size();
      }
    }
  }

  const StateBox& box() const { return box_; }
  int actions() const { return actions_; }

  double exit_rate(std::size_t s, Action u) const { return exit_[slot(s, u)]; }

  const Edge* begin(std::size_t s, Action u) const { return edges_.data() + offsets_[slot(s, u)]; }
  const Edge* end(std::size_t s, Action u) const { return edges_.data() + offsets_[slot(s, u) + 1]; }

  double max_exit_rate() const {
    double m = 0.0;
    for (double e : exit_) m = std::max(m, e);
    return m;
  }

 private:
  std::size_t slot(std::size_t s, Action u) const {
    return s * static_cast<std::size_t>(actions_) + static_cast<std::size_t>(u);
  }

  StateBox box_;
  int actions_ = 0;
  std::vector<std::size_t> offsets_;
  std::vector<double> exit_;
  std::vector<Edge> edges_;
};

}  // namespace ctpomdp
