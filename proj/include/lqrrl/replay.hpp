#pragma once

#include <algorithm>
#include <cstdio>
#include <deque>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <vector>

#include "lqrrl/linalg.hpp"

namespace lqrrl {

// One experienced transition. Ordinary transitions have dt = 1 and
// accumulated_reward = r_t; capture-region transitions span dt steps with a
// geometrically discounted reward sum. `abstract_index` is 0 for cartesian
// actions and 1 for the abstract regulator action.
struct Transition {
  Vector state;
  Vector observation;
  Vector action;
  int abstract_index = 0;
  double accumulated_reward = 0.0;
  Vector next_state;
  Vector next_observation;
  int dt = 1;
  bool terminal = false;
  bool absorbing = false;
};

inline void validate(const Transition& t) {
  if (t.dt < 1) throw ValidationError("transition: dt must be >= 1");
  if (t.absorbing && !t.terminal)
    throw ValidationError("transition: absorbing implies terminal");
  if (!all_finite(t.state) || !all_finite(t.next_state) ||
      !all_finite(t.action) || !std::isfinite(t.accumulated_reward))
    throw ValidationError("transition: non-finite entries");
}

struct SmdpAccumulation {
  double accumulated_reward = 0.0;
  int dt = 1;
  bool absorbing = false;
};

// Discounted reward sum over a temporally extended action, summed in
// ascending k with a running discount product.
inline SmdpAccumulation accumulate_smdp(const std::vector<double>& rewards,
                                        double gamma, int steps_in_region,
                                        bool episode_ended_inside) {
  if (rewards.empty())
    throw ValidationError("accumulate_smdp: empty reward list");
  if (int(rewards.size()) != steps_in_region || steps_in_region < 1)
    throw ValidationError("accumulate_smdp: rewards length must equal steps");
  if (gamma < 0.0 || gamma > 1.0)
    throw ValidationError("accumulate_smdp: gamma must be in [0, 1]");
  SmdpAccumulation out;
  double discount = 1.0;
  double sum = 0.0;
  for (double r : rewards) {
    sum += discount * r;
    discount *= gamma;
  }
  out.accumulated_reward = sum;
  out.dt = steps_in_region;
  out.absorbing = episode_ended_inside;
  return out;
}

// FIFO transition store with uniform with-replacement sampling and linear
// nearest-neighbor queries (sizes stay small enough that an index structure
// would not pay off).
class ReplayMemory {
 public:
  explicit ReplayMemory(uint32_t seed,
                        std::optional<size_t> capacity = std::nullopt)
      : capacity_(capacity), rng_(seed) {}

  void push(Transition t) {
    validate(t);
    store_.push_back(std::move(t));
    if (capacity_ && store_.size() > *capacity_) store_.pop_front();
  }

  size_t size() const { return store_.size(); }
  bool empty() const { return store_.empty(); }
  const Transition& operator[](size_t i) const { return store_[i]; }

  std::vector<const Transition*> sample_minibatch(size_t n) {
    if (store_.empty())
      throw EmptyMemoryError("sample_minibatch: replay memory is empty");
    std::uniform_int_distribution<size_t> pick(0, store_.size() - 1);
    std::vector<const Transition*> batch;
    batch.reserve(n);
    for (size_t i = 0; i < n; ++i) batch.push_back(&store_[pick(rng_)]);
    return batch;
  }

  // The min(k, size) stored transitions whose states are closest to the
  // query in (optionally weighted) Euclidean distance, ties broken by
  // insertion order.
  std::vector<const Transition*> nearest_neighbors(
      const Vector& query, size_t k, const Vector& weights = Vector()) const {
    if (store_.empty())
      throw EmptyMemoryError("nearest_neighbors: replay memory is empty");
    if (k < 1) throw ValidationError("nearest_neighbors: k must be >= 1");
    if (weights.size() != 0 && weights.size() != query.size())
      throw ShapeError("nearest_neighbors: weight length mismatch");
    std::vector<size_t> order(store_.size());
    std::iota(order.begin(), order.end(), size_t(0));
    std::vector<double> dist(store_.size());
    for (size_t i = 0; i < store_.size(); ++i) {
      const Vector diff = store_[i].state - query;
      dist[i] = weights.size() == 0
                    ? diff.squaredNorm()
                    : diff.cwiseProduct(weights).dot(diff);
    }
    const size_t take = std::min(k, store_.size());
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return dist[a] < dist[b]; });
    std::vector<const Transition*> out;
    out.reserve(take);
    for (size_t i = 0; i < take; ++i) out.push_back(&store_[order[i]]);
    return out;
  }

 private:
  std::optional<size_t> capacity_;
  std::deque<Transition> store_;
  std::mt19937 rng_;
};

// Diagnostic CSV dump: s..., a..., abstract_index, reward, s'..., dt,
// terminal, absorbing.
inline void dump_transitions(const ReplayMemory& memory, std::ostream& out) {
  if (memory.empty()) return;
  const auto& first = memory[0];
  for (Eigen::Index i = 0; i < first.state.size(); ++i) out << "s" << i << ",";
  for (Eigen::Index i = 0; i < first.action.size(); ++i) out << "a" << i << ",";
  out << "abstract_index,reward,";
  for (Eigen::Index i = 0; i < first.next_state.size(); ++i)
    out << "sp" << i << ",";
  out << "dt,terminal,absorbing\n";
  char buf[32];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
  };
  for (size_t r = 0; r < memory.size(); ++r) {
    const auto& t = memory[r];
    for (Eigen::Index i = 0; i < t.state.size(); ++i) {
      num(t.state(i));
      out << ",";
    }
    for (Eigen::Index i = 0; i < t.action.size(); ++i) {
      num(t.action(i));
      out << ",";
    }
    out << t.abstract_index << ",";
    num(t.accumulated_reward);
    out << ",";
    for (Eigen::Index i = 0; i < t.next_state.size(); ++i) {
      num(t.next_state(i));
      out << ",";
    }
    out << t.dt << "," << (t.terminal ? 1 : 0) << "," << (t.absorbing ? 1 : 0)
        << "\n";
  }
}

}  // namespace lqrrl
