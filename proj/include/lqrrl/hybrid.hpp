#pragma once

#include <map>
#include <mutex>
#include <random>

#include "lqrrl/agent.hpp"
#include "lqrrl/lqr.hpp"
#include "lqrrl/replay.hpp"

// Shared machinery of the hybrid agents: the capture-region bookkeeping that
// folds regulator-controlled stretches into one temporally extended
// transition, the regulator context (known or learned dynamics), and the
// automatic capture-threshold calibration.

namespace lqrrl {

// Accumulates the pending semi-MDP transition while the regulator holds the
// system inside the capture region. The stored action is the one that led
// into the region; every regulator step only appends its reward.
class CaptureTracker {
 public:
  bool active() const { return active_; }

  void open(Vector state, Vector observation, Vector action,
            int abstract_index, double first_reward) {
    active_ = true;
    state_ = std::move(state);
    observation_ = std::move(observation);
    action_ = std::move(action);
    abstract_index_ = abstract_index;
    rewards_.assign(1, first_reward);
  }

  void append(double reward) { rewards_.push_back(reward); }

  // Seals the pending transition: dt counts the entering step plus every
  // regulator step, rewards are discounted in ascending order, and the
  // transition is absorbing when the episode ended still inside the region.
  Transition emit(double gamma, const Vector& next_state,
                  const Vector& next_observation, bool episode_ended,
                  bool ended_inside) {
    const SmdpAccumulation acc =
        accumulate_smdp(rewards_, gamma, int(rewards_.size()), ended_inside);
    Transition t;
    t.state = state_;
    t.observation = observation_;
    t.action = action_;
    t.abstract_index = abstract_index_;
    t.accumulated_reward = acc.accumulated_reward;
    t.next_state = next_state;
    t.next_observation = next_observation;
    t.dt = acc.dt;
    t.terminal = episode_ended;
    t.absorbing = acc.absorbing;
    clear();
    return t;
  }

  void clear() {
    active_ = false;
    rewards_.clear();
  }

 private:
  bool active_ = false;
  Vector state_, observation_, action_;
  int abstract_index_ = 0;
  std::vector<double> rewards_;
};

// Largest cost level rho such that the regulator provably drives 100 states
// sampled on the boundary {s_bar' C s_bar = rho} back to the goal within one
// episode budget. Deterministic (fixed internal seed), cached per plant.
inline double calibrate_capture_threshold(const Environment& env,
                                          const LqrController& ctrl) {
  static std::mutex cache_mutex;
  static std::map<std::string, double> cache;

  std::string key = env.spec().name;
  {
    char buf[64];
    auto add = [&](double v) {
      std::snprintf(buf, sizeof buf, "|%.17g", v);
      key += buf;
    };
    add(env.spec().control_step);
    add(env.spec().timeout);
    for (Eigen::Index i = 0; i < env.spec().cost_state_diag.size(); ++i)
      add(env.spec().cost_state_diag(i));
    for (Eigen::Index i = 0; i < env.spec().action_max.size(); ++i)
      add(env.spec().action_max(i));
  }
  {
    std::lock_guard<std::mutex> lock(cache_mutex);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }

  const int n = env.spec().state_dim;
  const int horizon = env.max_steps();
  std::mt19937 rng(0xC0FFEE);
  std::normal_distribution<double> normal;

  auto stabilizes_from_level = [&](double level) {
    for (int sample = 0; sample < 100; ++sample) {
      Vector direction(n);
      double weighted = 0.0;
      do {
        for (int i = 0; i < n; ++i) direction(i) = normal(rng);
        direction.normalize();
        weighted = direction.cwiseProduct(env.spec().cost_state_diag)
                       .dot(direction);
      } while (weighted < 0.05);
      Vector s = env.spec().goal + direction * std::sqrt(level / weighted);
      try {
        for (int step = 0; step < horizon; ++step) {
          const StepResult res = env.step(s, ctrl.control(s));
          if (res.status == StepStatus::failed) return false;
          s = res.next_state;
        }
      } catch (const SimulationDiverged&) {
        return false;
      }
      if (env.goal_cost(s) > level * 0.01) return false;
    }
    return true;
  };

  double rho = 1e-6;
  double level = std::max(env.goal_cost(env.reset()), 1e-4);
  for (; level > 1e-6; level *= 0.5) {
    if (stabilizes_from_level(level)) {
      rho = level;
      break;
    }
  }

  std::lock_guard<std::mutex> lock(cache_mutex);
  cache[key] = rho;
  return rho;
}

// Regulator availability for one agent: known dynamics build the controller
// once from the true linearization; learned dynamics refit a locally linear
// model from recent experience at every episode start and fall back to the
// bare learner until a model is available.
class LqrContext {
 public:
  LqrContext(const AgentConfig& cfg, uint32_t llr_seed)
      : mode_(cfg.mode),
        dynamics_(cfg.dynamics),
        llr_neighbors_(cfg.llr_neighbors),
        llr_ridge_rel_(cfg.llr_ridge_rel),
        literal_feedforward_(cfg.literal_feedforward),
        capture_rho_(cfg.capture_rho),
        llr_memory_(llr_seed, cfg.llr_capacity) {
    if (!cfg.llr_distance_weights.empty()) {
      llr_weights_ = Vector(Eigen::Index(cfg.llr_distance_weights.size()));
      for (size_t i = 0; i < cfg.llr_distance_weights.size(); ++i)
        llr_weights_(Eigen::Index(i)) = cfg.llr_distance_weights[i];
    }
  }

  void initialize(const Environment& env) {
    if (mode_ == HybridMode::none) return;
    if (mode_ == HybridMode::capture && capture_rho_ <= 0.0) {
      const LinearModel model = linearize_true(env, env.spec().goal);
      const LqrController probe =
          build_controller(model, env, literal_feedforward_);
      capture_rho_ = calibrate_capture_threshold(env, probe);
    }
    if (dynamics_ == DynamicsSource::known) {
      const LinearModel model = linearize_true(env, env.spec().goal);
      controller_ = build_controller(model, env, literal_feedforward_);
      last_model_ = model;
      write_dump(model, *controller_);
    }
  }

  void begin_episode(const Environment& env) {
    if (mode_ == HybridMode::none || dynamics_ != DynamicsSource::learned)
      return;
    auto model = fit_llr_model(llr_memory_, env.spec().goal,
                               size_t(llr_neighbors_), llr_ridge_rel_,
                               env.spec().angle_dims, llr_weights_);
    if (!model) return;
    try {
      controller_ = build_controller(*model, env, literal_feedforward_);
      last_model_ = *model;
      write_dump(*model, *controller_);
    } catch (const RiccatiDivergence&) {
      controller_.reset();  // disabled until the model improves
    } catch (const SingularityError&) {
      controller_.reset();
    }
  }

  // Every raw environment step feeds the model memory, regulator-controlled
  // steps included; that region is exactly where the model matters.
  void observe_step(const Environment& env, const Vector& state,
                    const Vector& action, const Vector& next_state) {
    if (mode_ == HybridMode::none || dynamics_ != DynamicsSource::learned)
      return;
    Transition t;
    t.state = state;
    t.observation = state;
    t.action = action;
    t.accumulated_reward = 0.0;
    t.next_state = next_state;
    t.next_observation = next_state;
    llr_memory_.push(std::move(t));
  }

  bool enabled() const {
    return mode_ != HybridMode::none && controller_.has_value();
  }
  HybridMode mode() const { return mode_; }
  const LqrController& controller() const { return *controller_; }
  double capture_rho() const { return capture_rho_; }

  bool in_capture_region(const Environment& env, const Vector& state) const {
    return env.goal_cost(state) <= capture_rho_;
  }

  void set_controller(LqrController ctrl) { controller_ = std::move(ctrl); }

  // Attaching the dump late still records a controller that was built during
  // construction (the known-dynamics case).
  void set_dump(std::ostream* out) {
    dump_ = out;
    if (dump_ && controller_ && last_model_)
      dump_controller(*last_model_, *controller_, refit_count_++, *dump_);
  }

 private:
  void write_dump(const LinearModel& model, const LqrController& ctrl) {
    if (dump_) dump_controller(model, ctrl, refit_count_++, *dump_);
  }

  HybridMode mode_;
  DynamicsSource dynamics_;
  int llr_neighbors_;
  double llr_ridge_rel_;
  bool literal_feedforward_;
  double capture_rho_;
  Vector llr_weights_;
  ReplayMemory llr_memory_;
  std::optional<LqrController> controller_;
  std::optional<LinearModel> last_model_;
  std::ostream* dump_ = nullptr;
  int refit_count_ = 0;
};

// Stores one environment step, folding capture-region stretches into
// temporally extended transitions. Shared by both learners.
inline void record_transition(const Environment& env, LqrContext& lqr,
                              CaptureTracker& tracker, ReplayMemory& replay,
                              double gamma, const Vector& state,
                              const ActionInfo& info, double scaled_reward,
                              const StepResult& result) {
  const bool ended = result.status != StepStatus::running;
  const bool capture_active =
      lqr.mode() == HybridMode::capture && lqr.enabled();

  if (capture_active && info.lqr_controlled) {
    if (!tracker.active()) return;  // episode started inside the region
    tracker.append(scaled_reward);
    const bool inside_next = lqr.in_capture_region(env, result.next_state);
    if (ended || !inside_next)
      replay.push(tracker.emit(gamma, result.next_state,
                               env.observe(result.next_state), ended,
                               ended && inside_next));
    return;
  }

  if (capture_active && !ended &&
      lqr.in_capture_region(env, result.next_state)) {
    tracker.open(state, env.observe(state), info.action, info.abstract_index,
                 scaled_reward);
    return;
  }

  Transition t;
  t.state = state;
  t.observation = env.observe(state);
  t.action = info.action;
  t.abstract_index = info.abstract_index;
  t.accumulated_reward = scaled_reward;
  t.next_state = result.next_state;
  t.next_observation = env.observe(result.next_state);
  t.dt = 1;
  t.terminal = ended;
  // Entering the region on the episode's last step still counts as ending
  // inside it.
  t.absorbing = ended && capture_active &&
                lqr.in_capture_region(env, result.next_state);
  replay.push(std::move(t));
}

}  // namespace lqrrl
