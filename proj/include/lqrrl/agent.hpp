#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "lqrrl/environment.hpp"

namespace lqrrl {

// How the regulator is combined with the learner.
enum class HybridMode : uint8_t {
  none = 0,
  capture = 1,           // regulator takes over inside a goal region
  abstract_action = 2,   // extra abstract action slot (discrete methods only)
  integrated_action = 3  // regulator output as a state-dependent candidate
};

enum class DynamicsSource : uint8_t { known = 0, learned = 1 };

struct AgentConfig {
  std::string name = "dqn";
  bool ddpg = false;
  HybridMode mode = HybridMode::none;
  DynamicsSource dynamics = DynamicsSource::known;

  double epsilon = 0.05;         // random-action probability
  double epsilon_choice = 0.05;  // regulator/policy choice exploration (ddpg)
  double gamma = 0.99;
  int batch_size = 32;
  double lr_q = 1e-3;
  double lr_actor = 1e-4;
  int target_period = 100;   // gradient steps between target copies (dqn)
  double polyak_mix = 0.001; // moving-average mix (ddpg)
  int warmup = 1000;         // stored transitions before training starts
  int train_frequency = 1;   // environment steps per gradient step
  std::vector<int> hidden_sizes = {64, 64};
  double sigma = 1.0;        // exploration noise scale (ddpg)
  double ou_friction = 0.15;
  double capture_rho = 0.0;  // <= 0 requests automatic calibration
  int llr_neighbors = 64;
  size_t llr_capacity = 10000;
  double llr_ridge_rel = 1e-6;
  std::vector<double> llr_distance_weights;  // empty: unweighted distance
  bool literal_feedforward = false;
  std::optional<size_t> replay_capacity;  // default unbounded
  uint32_t seed = 0;
};

// What act() decided, echoed back to record() so bookkeeping can tell
// regulator-controlled steps from learner-controlled ones.
struct ActionInfo {
  Vector action;             // the action handed to the environment
  int abstract_index = 0;    // 1 when the abstract regulator action ran
  bool lqr_controlled = false;  // capture-region step
};

class Agent {
 public:
  virtual ~Agent() = default;
  virtual const AgentConfig& config() const = 0;

  virtual void begin_episode(const Environment& env) = 0;
  virtual ActionInfo act(const Environment& env, const Vector& state,
                         bool greedy) = 0;
  virtual void record(const Environment& env, const Vector& state,
                      const ActionInfo& info, double reward_unscaled,
                      const StepResult& result) = 0;

  // Greedy action-value of the agent's full candidate set; cheap probe used
  // by evaluations.
  virtual double greedy_value(const Environment& env,
                              const Vector& state) const = 0;

  virtual bool parameters_ok() const = 0;

  virtual void save(std::ostream& out) const = 0;
  virtual void load(std::istream& in) = 0;

  // Streams (A, B, E, P, F, a_ff) blocks on every controller refit.
  virtual void set_lqr_dump(std::ostream* out) = 0;
};

inline uint32_t derive_seed(uint32_t seed, uint32_t stream) {
  uint64_t z = (uint64_t(seed) << 16) + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return uint32_t(z ^ (z >> 31));
}

}  // namespace lqrrl
