#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "lqrrl/linalg.hpp"

namespace lqrrl {

enum class StepStatus { running, timeout, failed };

struct StepResult {
  Vector next_state;
  double reward = 0.0;  // unscaled quadratic reward
  StepStatus status = StepStatus::running;
};

struct EnvSpec {
  std::string name;
  int state_dim = 0;
  int action_dim = 0;
  Vector action_min, action_max;
  Vector goal;             // s_d
  Vector cost_state_diag;  // diagonal of C
  Vector cost_action_diag; // diagonal of D
  double control_step = 0.05;  // tau, seconds
  double timeout = 10.0;       // seconds
  std::vector<int> discretization;  // levels per action dimension
  std::vector<int> angle_dims;     // state indices encoded as sine-cosine
  double reward_scale = 1.0;       // applied to rewards seen by the learner
};

// A simulated plant. Instances are immutable after construction; stepping is
// a pure function of (state, action, steps_taken), which keeps replays,
// linearization and parallel runs trivially deterministic.
class Environment {
 public:
  explicit Environment(EnvSpec spec) : spec_(std::move(spec)) {
    if (spec_.control_step <= 0.0 || spec_.timeout <= 0.0)
      throw ValidationError(spec_.name + ": tau and timeout must be > 0");
    if (spec_.cost_state_diag.minCoeff() < 0.0 ||
        spec_.cost_action_diag.minCoeff() < 0.0)
      throw ValidationError(spec_.name + ": cost diagonals must be >= 0");
    for (int d : spec_.angle_dims)
      if (d < 0 || d >= spec_.state_dim)
        throw ValidationError(spec_.name + ": angle dim out of range");
  }
  virtual ~Environment() = default;

  const EnvSpec& spec() const { return spec_; }

  virtual Vector reset() const = 0;

  // Deviation from the goal, with angle dimensions wrapped into (-pi, pi].
  Vector goal_deviation(const Vector& state) const {
    Vector dev = state - spec_.goal;
    for (int d : spec_.angle_dims) dev(d) = wrap_angle(dev(d));
    return dev;
  }

  // r = -(s_bar' C s_bar + a' D a), evaluated at the current state.
  double reward(const Vector& state, const Vector& action) const {
    const Vector dev = goal_deviation(state);
    double cost = dev.cwiseProduct(spec_.cost_state_diag).dot(dev);
    cost += action.cwiseProduct(spec_.cost_action_diag).dot(action);
    return -cost;
  }

  double goal_cost(const Vector& state) const {
    const Vector dev = goal_deviation(state);
    return dev.cwiseProduct(spec_.cost_state_diag).dot(dev);
  }

  Vector clamp_action(const Vector& action) const {
    return action.cwiseMax(spec_.action_min).cwiseMin(spec_.action_max);
  }

  int max_steps() const {
    return int(std::ceil(spec_.timeout / spec_.control_step - 1e-9));
  }

  // Advances the plant by one control step. `steps_taken` is how many steps
  // the episode has already consumed; the result is flagged `timeout` when
  // this step exhausts the budget.
  StepResult step(const Vector& state, const Vector& action,
                  int steps_taken = 0) const {
    if (!all_finite(state))
      throw SimulationDiverged(spec_.name + ": non-finite state");
    const Vector a = clamp_action(action);
    StepResult out;
    out.reward = reward(state, a);
    out.next_state = next_state(state, a);
    if (!all_finite(out.next_state))
      throw SimulationDiverged(spec_.name + ": integration diverged");
    out.status = terminal_status(out.next_state);
    if (out.status == StepStatus::running && steps_taken + 1 >= max_steps())
      out.status = StepStatus::timeout;
    return out;
  }

  // Fixed-step RK4 over one control step, five substeps. Test plants with
  // discrete-time dynamics override this directly.
  virtual Vector next_state(const Vector& state, const Vector& action) const {
    constexpr int substeps = 5;
    const double h = spec_.control_step / substeps;
    Vector x = state;
    for (int i = 0; i < substeps; ++i) {
      const Vector k1 = derivative(x, action);
      const Vector k2 = derivative(x + 0.5 * h * k1, action);
      const Vector k3 = derivative(x + 0.5 * h * k2, action);
      const Vector k4 = derivative(x + h * k3, action);
      x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    for (int d : spec_.angle_dims) x(d) = wrap_angle(x(d));
    return x;
  }

  // Sine-cosine encoding: each angle dimension becomes the pair (sin, cos).
  Vector observe(const Vector& state) const {
    Vector obs(observation_dim());
    Eigen::Index o = 0;
    for (Eigen::Index d = 0; d < state.size(); ++d) {
      if (is_angle_dim(int(d))) {
        obs(o++) = std::sin(state(d));
        obs(o++) = std::cos(state(d));
      } else {
        obs(o++) = state(d);
      }
    }
    return obs;
  }

  int observation_dim() const {
    return spec_.state_dim + int(spec_.angle_dims.size());
  }

  // Cartesian product of uniform per-dimension grids spanning the action
  // bounds inclusive.
  std::vector<Vector> discrete_actions() const {
    std::vector<Vector> actions;
    Vector current(spec_.action_dim);
    build_grid(0, current, actions);
    return actions;
  }

 protected:
  virtual Vector derivative(const Vector& state, const Vector& action) const {
    throw SimulationDiverged(spec_.name + ": no continuous dynamics");
  }

  virtual StepStatus terminal_status(const Vector& next) const {
    return StepStatus::running;
  }

  bool is_angle_dim(int d) const {
    for (int a : spec_.angle_dims)
      if (a == d) return true;
    return false;
  }

 private:
  void build_grid(int dim, Vector& current,
                  std::vector<Vector>& actions) const {
    if (dim == spec_.action_dim) {
      actions.push_back(current);
      return;
    }
    const int levels = spec_.discretization[dim];
    const double lo = spec_.action_min(dim), hi = spec_.action_max(dim);
    for (int i = 0; i < levels; ++i) {
      current(dim) =
          levels == 1 ? lo : lo + (hi - lo) * double(i) / double(levels - 1);
      build_grid(dim + 1, current, actions);
    }
  }

  EnvSpec spec_;
};

}  // namespace lqrrl
