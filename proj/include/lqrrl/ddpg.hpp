#pragma once

#include <istream>
#include <random>

#include "lqrrl/hybrid.hpp"
#include "lqrrl/nn.hpp"

namespace lqrrl {

// Deterministic policy gradient learner: tanh actor scaled to the action
// bounds, scalar critic over (observation, action), Ornstein-Uhlenbeck
// exploration, moving-average target networks.
class DdpgAgent final : public Agent {
 public:
  DdpgAgent(AgentConfig cfg, const Environment& env)
      : cfg_(std::move(cfg)),
        rng_(cfg_.seed),
        replay_(derive_seed(cfg_.seed, 1), cfg_.replay_capacity),
        lqr_(cfg_, derive_seed(cfg_.seed, 2)) {
    if (!cfg_.ddpg) throw ConfigError("DdpgAgent: config names a dqn agent");
    if (cfg_.mode == HybridMode::abstract_action)
      throw ConfigError("the abstract regulator action needs a discrete "
                        "action set; ddpg cannot use it");
    obs_dim_ = env.observation_dim();
    action_dim_ = env.spec().action_dim;
    action_mid_ = 0.5 * (env.spec().action_max + env.spec().action_min);
    action_half_ = 0.5 * (env.spec().action_max - env.spec().action_min);
    action_scale_ = env.spec()
                        .action_max.cwiseAbs()
                        .cwiseMax(env.spec().action_min.cwiseAbs())
                        .cwiseMax(1e-12);

    NetworkSpec actor_spec;
    actor_spec.input_size = obs_dim_;
    actor_spec.hidden_sizes = cfg_.hidden_sizes;
    actor_spec.output_size = action_dim_;
    actor_spec.output_activation = OutputActivation::tanh;
    actor_ = make_network(actor_spec, rng_);
    actor_target_ = actor_;

    NetworkSpec critic_spec;
    critic_spec.input_size = obs_dim_ + action_dim_;
    critic_spec.hidden_sizes = cfg_.hidden_sizes;
    critic_spec.output_size = 1;
    critic_ = make_network(critic_spec, rng_);
    critic_target_ = critic_;

    actor_opt_ = make_adam(actor_, cfg_.lr_actor);
    critic_opt_ = make_adam(critic_, cfg_.lr_q);
    noise_ = Vector::Zero(action_dim_);
    lqr_.initialize(env);
  }

  const AgentConfig& config() const override { return cfg_; }

  void begin_episode(const Environment& env) override {
    lqr_.begin_episode(env);
    tracker_.clear();
    noise_.setZero();
  }

  ActionInfo act(const Environment& env, const Vector& state,
                 bool greedy) override {
    if (cfg_.mode == HybridMode::capture && lqr_.enabled() &&
        lqr_.in_capture_region(env, state))
      return {lqr_.controller().control(state), 0, true};

    const Vector obs = env.observe(state);
    Vector chosen = policy(actor_, obs);
    if (cfg_.mode == HybridMode::integrated_action && lqr_.enabled()) {
      // Greedy choice between the policy and the regulator by critic score,
      // with epsilon-greedy exploration over that choice.
      const Vector regulator = lqr_.controller().control(state);
      const bool regulator_better =
          critic_value(critic_, obs, regulator) > critic_value(critic_, obs, chosen);
      bool take_regulator = regulator_better;
      if (!greedy && uniform_(rng_) < cfg_.epsilon_choice)
        take_regulator = !take_regulator;
      if (take_regulator) chosen = regulator;
    }
    if (!greedy) {
      ou_step();
      chosen += noise_;
      chosen = env.clamp_action(chosen);
    }
    return {chosen, 0, false};
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
      train_step(env);
  }

  struct TrainResult {
    double critic_loss = 0.0;
    double actor_objective = 0.0;  // mean critic value of the policy actions
  };

  TrainResult train_step(const Environment& env) {
    const auto batch = replay_.sample_minibatch(size_t(cfg_.batch_size));
    const double inv_n = 1.0 / double(batch.size());
    TrainResult out;

    Grads critic_grads = zero_grads(critic_);
    for (const Transition* t : batch) {
      const double target = td_target(env, *t);
      const Vector input = critic_input(t->observation, t->action);
      const double q = forward(critic_, input)(0);
      const double err = q - target;
      out.critic_loss += err * err * inv_n;
      add_scaled(critic_grads,
                 gradient(critic_, input, Vector::Constant(1, 2.0 * err)),
                 inv_n);
    }
    adam_step(critic_, critic_grads, critic_opt_);

    // Actor ascends the critic through d(critic)/d(action), chained through
    // the bound scaling and the action normalization.
    for (const Transition* t : batch)
      out.actor_objective +=
          critic_value(critic_, t->observation,
                       policy(actor_, t->observation)) *
          inv_n;
    Grads actor_grads = zero_grads(actor_);
    add_scaled(actor_grads, actor_objective_gradient(batch), -1.0);
    adam_step(actor_, actor_grads, actor_opt_);

    target_update(critic_target_, critic_, TargetUpdate::moving_average,
                  cfg_.polyak_mix);
    target_update(actor_target_, actor_, TargetUpdate::moving_average,
                  cfg_.polyak_mix);
    return out;
  }

  // Critic target: bootstrap on the target policy action, or on the better
  // of {target policy, current regulator} in integrated mode.
  double td_target(const Environment& env, const Transition& t) const {
    double target = t.accumulated_reward;
    if (!t.terminal) {
      Vector candidate = policy(actor_target_, t.next_observation);
      if (cfg_.mode == HybridMode::integrated_action && lqr_.enabled()) {
        const Vector regulator = lqr_.controller().control(t.next_state);
        if (critic_value(critic_target_, t.next_observation, regulator) >
            critic_value(critic_target_, t.next_observation, candidate))
          candidate = regulator;
      }
      target += std::pow(cfg_.gamma, double(t.dt)) *
                critic_value(critic_target_, t.next_observation, candidate);
    }
    return target;
  }

  double greedy_value(const Environment& env,
                      const Vector& state) const override {
    const Vector obs = env.observe(state);
    double best = critic_value(critic_, obs, policy(actor_, obs));
    if (cfg_.mode == HybridMode::integrated_action && lqr_.enabled())
      best = std::max(best, critic_value(critic_, obs,
                                         lqr_.controller().control(state)));
    return best;
  }

  Vector policy(const Network& actor, const Vector& obs) const {
    return action_mid_ + action_half_.cwiseProduct(forward(actor, obs));
  }

  double critic_value(const Network& critic, const Vector& obs,
                      const Vector& action) const {
    return forward(critic, critic_input(obs, action))(0);
  }

  bool parameters_ok() const override {
    return parameters_finite(actor_) && parameters_finite(critic_);
  }

  const ReplayMemory& replay() const { return replay_; }
  ReplayMemory& replay() { return replay_; }
  const Network& actor_network() const { return actor_; }
  Network& actor_network() { return actor_; }
  const Network& critic_network() const { return critic_; }
  Network& critic_network() { return critic_; }
  const Network& actor_target_network() const { return actor_target_; }
  const Network& critic_target_network() const { return critic_target_; }
  Vector action_half() const { return action_half_; }
  LqrContext& lqr() { return lqr_; }

  // Gradient of the mean critic value of the policy's actions over a batch,
  // with respect to the actor parameters. train_step descends its negation.
  Grads actor_objective_gradient(
      const std::vector<const Transition*>& batch) const {
    Grads grads = zero_grads(actor_);
    const double inv_n = 1.0 / double(batch.size());
    const Vector chain = action_half_.cwiseQuotient(action_scale_);
    for (const Transition* t : batch) {
      const Vector raw = forward(actor_, t->observation);
      const Vector action = action_mid_ + action_half_.cwiseProduct(raw);
      const Vector input = critic_input(t->observation, action);
      const Grads through_critic =
          gradient(critic_, input, Vector::Constant(1, 1.0));
      const Vector dq_da = through_critic.dinput.tail(action_dim_);
      add_scaled(grads,
                 gradient(actor_, t->observation,
                          Vector(dq_da.cwiseProduct(chain))),
                 inv_n);
    }
    return grads;
  }

  void inject_controller(LqrController ctrl) {
    lqr_.set_controller(std::move(ctrl));
  }
  void set_lqr_dump(std::ostream* out) override { lqr_.set_dump(out); }

  void save(std::ostream& out) const override {
    save_network(actor_, out);
    save_network(actor_target_, out);
    save_network(critic_, out);
    save_network(critic_target_, out);
  }
  void load(std::istream& in) override {
    actor_ = load_network(in);
    actor_target_ = load_network(in);
    critic_ = load_network(in);
    critic_target_ = load_network(in);
    actor_opt_ = make_adam(actor_, cfg_.lr_actor);
    critic_opt_ = make_adam(critic_, cfg_.lr_q);
  }

 private:
  Vector critic_input(const Vector& obs, const Vector& action) const {
    Vector input(obs_dim_ + action_dim_);
    input.head(obs_dim_) = obs;
    input.tail(action_dim_) = action.cwiseQuotient(action_scale_);
    return input;
  }

  // Discrete-time Ornstein-Uhlenbeck noise: mean-reverting with the
  // configured friction, driven by N(0, sigma) per control step.
  void ou_step() {
    for (Eigen::Index i = 0; i < noise_.size(); ++i)
      noise_(i) =
          (1.0 - cfg_.ou_friction) * noise_(i) + cfg_.sigma * normal_(rng_);
  }

  AgentConfig cfg_;
  std::mt19937 rng_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
  ReplayMemory replay_;
  LqrContext lqr_;
  CaptureTracker tracker_;
  Vector action_mid_, action_half_, action_scale_;
  Vector noise_;
  int obs_dim_ = 0;
  int action_dim_ = 0;
  Network actor_, actor_target_, critic_, critic_target_;
  AdamState actor_opt_, critic_opt_;
  long env_steps_ = 0;
};

}  // namespace lqrrl
