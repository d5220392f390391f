#include <catch2/catch.hpp>
#include <random>

#include "lqrrl/environments.hpp"

using namespace lqrrl;

TEST_CASE("reset states", "[envs]") {
  PendulumEnv pendulum;
  Vector ps = pendulum.reset();
  REQUIRE(ps(0) == Approx(M_PI));
  REQUIRE(ps(1) == 0.0);

  CartPoleEnv cartpole;
  Vector cs = cartpole.reset();
  REQUIRE(cs(0) == 0.0);
  REQUIRE(cs(1) == Approx(M_PI));
  REQUIRE(cs(2) == 0.0);
  REQUIRE(cs(3) == 0.0);

  FlyerEnv flyer;
  Vector fs = flyer.reset();
  Vector expected(6);
  expected << -0.4, -0.4, 0, 0, 0, 0;
  REQUIRE((fs - expected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("flyer hover action is a fixed point", "[envs]") {
  FlyerEnv flyer;
  Vector hover(2);
  hover << -0.0095, -0.0095;  // forces 0.4905 each, total = m g
  Vector goal = Vector::Zero(6);
  StepResult res = flyer.step(goal, hover);
  REQUIRE(res.next_state.cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("reward is zero at the goal with zero action", "[envs]") {
  PendulumEnv pendulum;
  CartPoleEnv cartpole;
  FlyerEnv flyer;
  REQUIRE(pendulum.reward(Vector::Zero(2), Vector::Zero(1)) == 0.0);
  REQUIRE(cartpole.reward(Vector::Zero(4), Vector::Zero(1)) == 0.0);
  REQUIRE(flyer.reward(Vector::Zero(6), Vector::Zero(2)) == 0.0);
}

TEST_CASE("reward is nonpositive everywhere", "[envs]") {
  PendulumEnv pendulum;
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> angle(-M_PI, M_PI);
  std::uniform_real_distribution<double> vel(-20.0, 20.0);
  std::uniform_real_distribution<double> act(-3.0, 3.0);
  for (int i = 0; i < 200; ++i) {
    Vector s(2);
    s << angle(rng), vel(rng);
    Vector a(1);
    a << act(rng);
    REQUIRE(pendulum.reward(s, a) <= 0.0);
  }
}

TEST_CASE("flyer leaving the target area fails the episode", "[envs]") {
  FlyerEnv flyer;
  Vector s(6);
  s << 0.99, 0.0, 0.0, 5.0, 0.0, 0.0;  // moving fast toward the boundary
  StepResult res = flyer.step(s, Vector::Zero(2));
  REQUIRE(res.next_state(0) > 1.0);
  REQUIRE(res.status == StepStatus::failed);
}

TEST_CASE("flyer obstacle contact fails the episode", "[envs]") {
  FlyerEnv flyer;
  REQUIRE(flyer.in_obstacle(-0.2, -0.25));
  REQUIRE_FALSE(flyer.in_obstacle(-0.4, -0.4));
  Vector s(6);
  s << -0.2, -0.35, 0.0, 0.0, 2.0, 0.0;  // rising into the obstacle
  StepResult res = flyer.step(s, Vector::Zero(2));
  REQUIRE(res.status == StepStatus::failed);
}

TEST_CASE("sine-cosine observation encoding", "[envs]") {
  PendulumEnv pendulum;
  Vector s(2);
  s << 0.0, 1.5;
  Vector obs = pendulum.observe(s);
  REQUIRE(obs.size() == 3);
  REQUIRE(obs(0) == Approx(0.0).margin(1e-15));
  REQUIRE(obs(1) == Approx(1.0));
  REQUIRE(obs(2) == Approx(1.5));

  s(0) = M_PI / 2.0;
  obs = pendulum.observe(s);
  REQUIRE(obs(0) == Approx(1.0));
  REQUIRE(obs(1) == Approx(0.0).margin(1e-15));

  FlyerEnv flyer;
  REQUIRE(flyer.observe(flyer.reset()).size() == 7);

  CartPoleEnv cartpole;
  Vector cs(4);
  cs << 0.2, M_PI, -0.1, 0.4;
  Vector cobs = cartpole.observe(cs);
  REQUIRE(cobs.size() == 5);
  REQUIRE(cobs(0) == Approx(0.2));
  REQUIRE(cobs(2) == Approx(-1.0));
}

TEST_CASE("discrete action grids", "[envs]") {
  PendulumEnv pendulum;
  auto actions = pendulum.discrete_actions();
  REQUIRE(actions.size() == 3);
  REQUIRE(actions[0](0) == Approx(-3.0));
  REQUIRE(actions[1](0) == Approx(0.0));
  REQUIRE(actions[2](0) == Approx(3.0));

  FlyerEnv flyer;
  auto fa = flyer.discrete_actions();
  REQUIRE(fa.size() == 9);
  REQUIRE(fa.front()(0) == Approx(-0.1));
  REQUIRE(fa.front()(1) == Approx(-0.1));
  REQUIRE(fa.back()(0) == Approx(0.1));
  REQUIRE(fa.back()(1) == Approx(0.1));
  bool has_zero = false;
  for (const auto& a : fa)
    if (a.cwiseAbs().maxCoeff() == 0.0) has_zero = true;
  REQUIRE(has_zero);

  PendulumParams two_level;
  two_level.discretization = 2;
  two_level.voltage_max = 1.0;
  PendulumEnv coarse(two_level);
  auto ca = coarse.discrete_actions();
  REQUIRE(ca.size() == 2);
  REQUIRE(ca[0](0) == Approx(-1.0));
  REQUIRE(ca[1](0) == Approx(1.0));
}

TEST_CASE("pendulum energy is non-increasing under zero action", "[envs]") {
  PendulumEnv pendulum;
  REQUIRE(pendulum.params().damping > 0.0);
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> angle(-M_PI, M_PI);
  std::uniform_real_distribution<double> vel(-10.0, 10.0);
  for (int trial = 0; trial < 10; ++trial) {
    Vector s(2);
    s << angle(rng), vel(rng);
    double energy = pendulum.mechanical_energy(s);
    for (int i = 0; i < 50; ++i) {
      s = pendulum.step(s, Vector::Zero(1)).next_state;
      const double next_energy = pendulum.mechanical_energy(s);
      REQUIRE(next_energy <= energy + 1e-9);
      energy = next_energy;
    }
  }
}

TEST_CASE("episode length never exceeds the timeout budget", "[envs]") {
  PendulumEnv pendulum;
  CartPoleEnv cartpole;
  FlyerEnv flyer;
  REQUIRE(pendulum.max_steps() == 100);
  REQUIRE(cartpole.max_steps() == 200);
  REQUIRE(flyer.max_steps() == 400);

  std::mt19937 rng(6);
  std::uniform_real_distribution<double> act(-3.0, 3.0);
  Vector s = pendulum.reset();
  int steps = 0;
  while (true) {
    Vector a(1);
    a << act(rng);
    StepResult res = pendulum.step(s, a, steps);
    ++steps;
    s = res.next_state;
    if (res.status != StepStatus::running) break;
  }
  REQUIRE(steps == 100);
}

TEST_CASE("pendulum cannot swing up in a single swing", "[envs]") {
  // Full constant voltage from the hanging start is the strongest possible
  // first-swing pump (torque stays aligned with the motion until the swing
  // reverses); it must still end well short of the upright.
  PendulumEnv pendulum;
  for (double sign : {1.0, -1.0}) {
    Vector s = pendulum.reset();
    Vector a(1);
    a << sign * pendulum.params().voltage_max;
    double closest = M_PI;
    double prev_vel = 0.0;
    bool moved = false;
    for (int i = 0; i < 400; ++i) {
      s = pendulum.step(s, a).next_state;
      closest = std::min(closest, std::abs(wrap_angle(s(0))));
      if (moved && prev_vel * s(1) <= 0.0) break;  // first swing over
      if (std::abs(s(1)) > 1e-2) moved = true;
      prev_vel = s(1);
    }
    REQUIRE(closest > 1.0);  // stays at least a radian away from upright
  }
}

TEST_CASE("simulation diverged error on non-finite state", "[envs]") {
  PendulumEnv pendulum;
  Vector s(2);
  s << std::nan(""), 0.0;
  REQUIRE_THROWS_AS(pendulum.step(s, Vector::Zero(1)), SimulationDiverged);
}
