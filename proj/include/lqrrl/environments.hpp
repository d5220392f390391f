#pragma once

#include <memory>

#include "lqrrl/environment.hpp"

// The three regulation/swing-up plants. All use the quadratic reward
// r = -(s_bar' C s_bar + a' D a) around a goal state, sine-cosine angle
// observations, and a fixed control step.

namespace lqrrl {

// Motor-driven pendulum. The angle is measured from the upright equilibrium
// (0 = up, pi = hanging). The motor is too weak to hold the pendulum
// horizontal, so the swing-up needs at least one pumping swing.
struct PendulumParams {
  double inertia = 1.91e-4;        // kg m^2
  double mass = 0.055;             // kg
  double gravity = 9.81;           // m/s^2
  double length = 0.042;           // m, center of mass distance
  double damping = 3e-6;           // N m s
  double torque_constant = 0.0536; // N m / A
  double resistance = 9.5;         // ohm
  double voltage_max = 3.0;        // V
  double tau = 0.03;
  double timeout = 3.0;
  double reward_scale = 0.1;
  int discretization = 3;
};

class PendulumEnv final : public Environment {
 public:
  explicit PendulumEnv(const PendulumParams& p = {})
      : Environment(build_spec(p)), p_(p) {}

  Vector reset() const override {
    Vector s(2);
    s << M_PI, 0.0;  // hanging, at rest
    return s;
  }

  double mechanical_energy(const Vector& s) const {
    return 0.5 * p_.inertia * s(1) * s(1) +
           p_.mass * p_.gravity * p_.length * std::cos(s(0));
  }

  const PendulumParams& params() const { return p_; }

 protected:
  Vector derivative(const Vector& s, const Vector& a) const override {
    const double theta = s(0), omega = s(1), u = a(0);
    const double k = p_.torque_constant, r = p_.resistance;
    const double acc = (p_.mass * p_.gravity * p_.length * std::sin(theta) -
                        (p_.damping + k * k / r) * omega + (k / r) * u) /
                       p_.inertia;
    Vector d(2);
    d << omega, acc;
    return d;
  }

 private:
  static EnvSpec build_spec(const PendulumParams& p) {
    EnvSpec spec;
    spec.name = "pendulum";
    spec.state_dim = 2;
    spec.action_dim = 1;
    spec.action_min = Vector::Constant(1, -p.voltage_max);
    spec.action_max = Vector::Constant(1, p.voltage_max);
    spec.goal = Vector::Zero(2);
    spec.cost_state_diag = Vector(2);
    spec.cost_state_diag << 5.0, 0.01;
    spec.cost_action_diag = Vector::Constant(1, 1.0);
    spec.control_step = p.tau;
    spec.timeout = p.timeout;
    spec.discretization = {p.discretization};
    spec.angle_dims = {0};
    spec.reward_scale = p.reward_scale;
    return spec;
  }

  PendulumParams p_;
};

// Cart-pole swing-up, frictionless, no track limit. State [x, theta, xdot,
// thetadot] with theta measured from upright.
struct CartPoleParams {
  double cart_mass = 1.0;
  double pole_mass = 0.1;
  double pole_half_length = 0.25;
  double gravity = 9.81;
  double force_max = 15.0;
  double tau = 0.05;
  double timeout = 10.0;
  double reward_scale = 0.1;
  int discretization = 3;
};

class CartPoleEnv final : public Environment {
 public:
  explicit CartPoleEnv(const CartPoleParams& p = {})
      : Environment(build_spec(p)), p_(p) {}

  Vector reset() const override {
    Vector s(4);
    s << 0.0, M_PI, 0.0, 0.0;  // cart centered, pole down, at rest
    return s;
  }

  const CartPoleParams& params() const { return p_; }

 protected:
  Vector derivative(const Vector& s, const Vector& a) const override {
    const double theta = s(1), xdot = s(2), omega = s(3), force = a(0);
    const double total = p_.cart_mass + p_.pole_mass;
    const double ml = p_.pole_mass * p_.pole_half_length;
    const double sin_t = std::sin(theta), cos_t = std::cos(theta);
    const double temp = (force + ml * omega * omega * sin_t) / total;
    const double theta_acc =
        (p_.gravity * sin_t - cos_t * temp) /
        (p_.pole_half_length *
         (4.0 / 3.0 - p_.pole_mass * cos_t * cos_t / total));
    const double x_acc = temp - ml * theta_acc * cos_t / total;
    Vector d(4);
    d << xdot, omega, x_acc, theta_acc;
    return d;
  }

 private:
  static EnvSpec build_spec(const CartPoleParams& p) {
    EnvSpec spec;
    spec.name = "cartpole";
    spec.state_dim = 4;
    spec.action_dim = 1;
    spec.action_min = Vector::Constant(1, -p.force_max);
    spec.action_max = Vector::Constant(1, p.force_max);
    spec.goal = Vector::Zero(4);
    spec.cost_state_diag = Vector(4);
    spec.cost_state_diag << 2.0, 1.0, 0.1, 0.1;
    spec.cost_action_diag = Vector::Constant(1, 1.0 / 15.0);
    spec.control_step = p.tau;
    spec.timeout = p.timeout;
    spec.discretization = {p.discretization};
    spec.angle_dims = {1};
    spec.reward_scale = p.reward_scale;
    return spec;
  }

  CartPoleParams p_;
};

// Planar flyer: a rod with perpendicular forces at both tips. The action is
// the force pair minus the zero-action offset [0.5, 0.5], so each actual
// force is action + 0.5. Episodes fail when the flyer leaves the target
// area or touches the obstacle.
struct FlyerParams {
  double mass = 0.1;    // kg
  double length = 0.1;  // m
  double gravity = 9.81;
  double force_max = 0.1;  // action bound, N
  double area_half_width = 1.0;
  double obstacle_min_x = -0.4, obstacle_max_x = 0.1;
  double obstacle_min_y = -0.3, obstacle_max_y = -0.2;
  double start_x = -0.4, start_y = -0.4;
  double tau = 0.05;
  double timeout = 20.0;
  double reward_scale = 1.0;
  int discretization = 3;

  double inertia() const { return mass * length * length / 3.0; }
};

class FlyerEnv final : public Environment {
 public:
  explicit FlyerEnv(const FlyerParams& p = {})
      : Environment(build_spec(p)), p_(p) {}

  Vector reset() const override {
    Vector s = Vector::Zero(6);
    s(0) = p_.start_x;
    s(1) = p_.start_y;
    return s;
  }

  bool in_obstacle(double x, double y) const {
    return x >= p_.obstacle_min_x && x <= p_.obstacle_max_x &&
           y >= p_.obstacle_min_y && y <= p_.obstacle_max_y;
  }

  const FlyerParams& params() const { return p_; }

 protected:
  Vector derivative(const Vector& s, const Vector& a) const override {
    const double theta = s(2);
    const double f_left = a(0) + 0.5, f_right = a(1) + 0.5;
    const double thrust = f_left + f_right;
    Vector d(6);
    d(0) = s(3);
    d(1) = s(4);
    d(2) = s(5);
    d(3) = -thrust * std::sin(theta) / p_.mass;
    d(4) = thrust * std::cos(theta) / p_.mass - p_.gravity;
    d(5) = (f_right - f_left) * p_.length / p_.inertia();
    return d;
  }

  StepStatus terminal_status(const Vector& next) const override {
    const double x = next(0), y = next(1);
    if (std::abs(x) >= p_.area_half_width || std::abs(y) >= p_.area_half_width)
      return StepStatus::failed;
    if (in_obstacle(x, y)) return StepStatus::failed;
    return StepStatus::running;
  }

 private:
  static EnvSpec build_spec(const FlyerParams& p) {
    EnvSpec spec;
    spec.name = "flyer";
    spec.state_dim = 6;
    spec.action_dim = 2;
    spec.action_min = Vector::Constant(2, -p.force_max);
    spec.action_max = Vector::Constant(2, p.force_max);
    spec.goal = Vector::Zero(6);
    spec.cost_state_diag = Vector(6);
    spec.cost_state_diag << 1.0, 1.0, 1.0, 0.0, 0.0, 0.0;
    spec.cost_action_diag = Vector::Constant(2, 1.0);
    spec.control_step = p.tau;
    spec.timeout = p.timeout;
    spec.discretization = {p.discretization, p.discretization};
    spec.angle_dims = {2};
    spec.reward_scale = p.reward_scale;
    return spec;
  }

  FlyerParams p_;
};

// Learner defaults that vary per plant (discount, exploration noise scale).
struct EnvTrainingDefaults {
  double gamma = 0.99;
  double sigma = 1.0;
};

inline EnvTrainingDefaults env_training_defaults(const std::string& name) {
  if (name == "pendulum") return {0.99, 1.0};
  if (name == "cartpole") return {0.97, 5.0};
  if (name == "flyer") return {0.99, 0.01};
  throw ConfigError("unknown environment: " + name);
}

inline std::unique_ptr<Environment> make_environment(const std::string& name) {
  if (name == "pendulum") return std::make_unique<PendulumEnv>();
  if (name == "cartpole") return std::make_unique<CartPoleEnv>();
  if (name == "flyer") return std::make_unique<FlyerEnv>();
  throw ConfigError("unknown environment: " + name);
}

}  // namespace lqrrl
