#pragma once

#include <istream>
#include <random>

#include "lqrrl/hybrid.hpp"
#include "lqrrl/nn.hpp"

namespace lqrrl {

// Deep Q learner over a discrete action set, with the optional regulator
// hybrids. The Q network scores (observation, action) pairs with a single
// scalar head, so state-dependent continuous candidates (the integrated
// regulator action) can be evaluated alongside the discrete grid.
class DqnAgent final : public Agent {
 public:
  DqnAgent(AgentConfig cfg, const Environment& env)
      : cfg_(std::move(cfg)),
        rng_(cfg_.seed),
        replay_(derive_seed(cfg_.seed, 1), cfg_.replay_capacity),
        lqr_(cfg_, derive_seed(cfg_.seed, 2)),
        actions_(env.discrete_actions()) {
    if (cfg_.ddpg) throw ConfigError("DqnAgent: config names a ddpg agent");
    for (int levels : env.spec().discretization)
      if (levels < 2)
        throw ConfigError("dqn needs at least 2 discretization levels per dim");
    obs_dim_ = env.observation_dim();
    action_dim_ = env.spec().action_dim;
    abstract_slot_ = cfg_.mode == HybridMode::abstract_action;
    action_scale_ = env.spec()
                        .action_max.cwiseAbs()
                        .cwiseMax(env.spec().action_min.cwiseAbs())
                        .cwiseMax(1e-12);

    NetworkSpec spec;
    spec.input_size = obs_dim_ + action_dim_ + (abstract_slot_ ? 1 : 0);
    spec.hidden_sizes = cfg_.hidden_sizes;
    spec.output_size = 1;
    q_ = make_network(spec, rng_);
    q_target_ = q_;
    optimizer_ = make_adam(q_, cfg_.lr_q);
    lqr_.initialize(env);
  }

  const AgentConfig& config() const override { return cfg_; }

  void begin_episode(const Environment& env) override {
    lqr_.begin_episode(env);
    tracker_.clear();
  }

  ActionInfo act(const Environment& env, const Vector& state,
                 bool greedy) override {
    if (cfg_.mode == HybridMode::capture && lqr_.enabled() &&
        lqr_.in_capture_region(env, state))
      return {lqr_.controller().control(state), 0, true};

    const Vector obs = env.observe(state);
    const auto candidates = candidate_set(env, state);
    size_t pick;
    if (!greedy && uniform_(rng_) < cfg_.epsilon) {
      pick = size_t(rng_() % candidates.size());
    } else {
      pick = argmax_candidate(q_, obs, candidates);
    }
    return {candidates[pick].action, candidates[pick].abstract_index, false};
  }

  void record(const Environment& env, const Vector& state,
              const ActionInfo& info, double reward_unscaled,
              const StepResult& result) override {
    const double r = reward_unscaled * env.spec().reward_scale;
    lqr_.observe_step(env, state, info.action, result.next_state);
    record_transition(env, lqr_, tracker_, replay_, cfg_.gamma, state, info, r,
                      result);
    ++env_steps_;
    if (replay_.size() >= size_t(cfg_.warmup) &&
        env_steps_ % cfg_.train_frequency == 0)
      last_loss_ = train_step(env);
  }

  // One minibatch update; returns the mean squared TD error. Exposed so the
  // tests can drive training directly.
  double train_step(const Environment& env) {
    const auto batch = replay_.sample_minibatch(size_t(cfg_.batch_size));
    Grads grads = zero_grads(q_);
    double loss = 0.0;
    const double inv_n = 1.0 / double(batch.size());
    for (const Transition* t : batch) {
      const double target = td_target(env, *t);
      const Vector input =
          q_input(t->observation, t->action, t->abstract_index);
      const double q = forward(q_, input)(0);
      const double err = q - target;
      loss += err * err * inv_n;
      add_scaled(grads, gradient(q_, input, Vector::Constant(1, 2.0 * err)),
                 inv_n);
    }
    adam_step(q_, grads, optimizer_);
    ++train_steps_;
    if (train_steps_ % cfg_.target_period == 0)
      target_update(q_target_, q_, TargetUpdate::copy);
    return loss;
  }

  // Bootstrap target. Candidates are recomputed from the current regulator
  // at every sampling, so stored transitions never pin down a stale
  // integrated action.
  double td_target(const Environment& env, const Transition& t) const {
    double target = t.accumulated_reward;
    if (!t.terminal) {
      const auto candidates = candidate_set(env, t.next_state);
      target += std::pow(cfg_.gamma, double(t.dt)) *
                best_value(q_target_, t.next_observation, candidates);
    }
    return target;
  }

  double greedy_value(const Environment& env,
                      const Vector& state) const override {
    return best_value(q_, env.observe(state), candidate_set(env, state));
  }

  double q_value(const Vector& obs, const Vector& action,
                 int abstract_index) const {
    return forward(q_, q_input(obs, action, abstract_index))(0);
  }

  bool parameters_ok() const override { return parameters_finite(q_); }

  double last_loss() const { return last_loss_; }
  const ReplayMemory& replay() const { return replay_; }
  ReplayMemory& replay() { return replay_; }
  const Network& q_network() const { return q_; }
  Network& q_network() { return q_; }
  const Network& q_target_network() const { return q_target_; }
  Network& q_target_network() { return q_target_; }
  const std::vector<Vector>& discrete_action_list() const { return actions_; }
  LqrContext& lqr() { return lqr_; }

  struct Candidate {
    Vector action;  // what the environment would execute
    int abstract_index;
  };

  // Discrete grid plus the regulator candidate when one is active; targets
  // and selection both draw from this set.
  std::vector<Candidate> candidate_set(const Environment& env,
                                       const Vector& state) const {
    std::vector<Candidate> candidates;
    candidates.reserve(actions_.size() + 1);
    for (const Vector& a : actions_) candidates.push_back({a, 0});
    if (!lqr_.enabled()) return candidates;
    if (cfg_.mode == HybridMode::abstract_action)
      candidates.push_back({lqr_.controller().control(state), 1});
    else if (cfg_.mode == HybridMode::integrated_action)
      candidates.push_back({lqr_.controller().control(state), 0});
    return candidates;
  }

  void inject_controller(LqrController ctrl) {
    lqr_.set_controller(std::move(ctrl));
  }
  void set_lqr_dump(std::ostream* out) override { lqr_.set_dump(out); }

  void save(std::ostream& out) const override {
    save_network(q_, out);
    save_network(q_target_, out);
  }
  void load(std::istream& in) override {
    q_ = load_network(in);
    q_target_ = load_network(in);
    optimizer_ = make_adam(q_, cfg_.lr_q);
  }

 private:
  // The abstract action is encoded canonically: zeros in the cartesian slot
  // and 1 in the abstract dimension, whatever control it applied.
  Vector q_input(const Vector& obs, const Vector& action,
                 int abstract_index) const {
    Vector input(q_.spec.input_size);
    input.head(obs_dim_) = obs;
    if (abstract_index == 0)
      input.segment(obs_dim_, action_dim_) = action.cwiseQuotient(action_scale_);
    else
      input.segment(obs_dim_, action_dim_).setZero();
    if (abstract_slot_) input(obs_dim_ + action_dim_) = double(abstract_index);
    return input;
  }

  double best_value(const Network& net, const Vector& obs,
                    const std::vector<Candidate>& candidates) const {
    double best = -std::numeric_limits<double>::infinity();
    for (const Candidate& c : candidates) {
      const double v =
          forward(net, q_input(obs, c.action, c.abstract_index))(0);
      if (v > best) best = v;
    }
    return best;
  }

  size_t argmax_candidate(const Network& net, const Vector& obs,
                          const std::vector<Candidate>& candidates) const {
    size_t best_index = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < candidates.size(); ++i) {
      const double v = forward(
          net, q_input(obs, candidates[i].action, candidates[i].abstract_index))(0);
      if (v > best) {  // ties break toward the lowest index
        best = v;
        best_index = i;
      }
    }
    return best_index;
  }

  AgentConfig cfg_;
  std::mt19937 rng_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  ReplayMemory replay_;
  LqrContext lqr_;
  CaptureTracker tracker_;
  std::vector<Vector> actions_;
  Vector action_scale_;
  int obs_dim_ = 0;
  int action_dim_ = 0;
  bool abstract_slot_ = false;
  Network q_, q_target_;
  AdamState optimizer_;
  long env_steps_ = 0;
  long train_steps_ = 0;
  double last_loss_ = 0.0;
};

}  // namespace lqrrl
