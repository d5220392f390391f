#include <catch2/catch.hpp>
#include <array>
#include <cmath>
#include <random>
#include <sstream>

#include "lqrrl/replay.hpp"

using namespace lqrrl;

namespace {

Transition make_transition(double s, double a = 0.0, double r = 0.0) {
  Transition t;
  t.state = Vector::Constant(1, s);
  t.observation = t.state;
  t.action = Vector::Constant(1, a);
  t.accumulated_reward = r;
  t.next_state = t.state;
  t.next_observation = t.state;
  return t;
}

}  // namespace

TEST_CASE("push grows the memory and respects capacity", "[replay]") {
  ReplayMemory memory(1);
  memory.push(make_transition(0.0));
  REQUIRE(memory.size() == 1);

  ReplayMemory capped(1, 2);
  capped.push(make_transition(1.0));
  capped.push(make_transition(2.0));
  capped.push(make_transition(3.0));
  REQUIRE(capped.size() == 2);
  REQUIRE(capped[0].state(0) == 2.0);  // oldest evicted

  ReplayMemory unbounded(1);
  for (int i = 0; i < 10000; ++i) unbounded.push(make_transition(double(i)));
  REQUIRE(unbounded.size() == 10000);
}

TEST_CASE("push validates invariants", "[replay]") {
  ReplayMemory memory(1);
  Transition bad = make_transition(0.0);
  bad.dt = 0;
  REQUIRE_THROWS_AS(memory.push(bad), ValidationError);
  Transition bad2 = make_transition(0.0);
  bad2.absorbing = true;
  bad2.terminal = false;
  REQUIRE_THROWS_AS(memory.push(bad2), ValidationError);
}

TEST_CASE("minibatch sampling draws with replacement", "[replay]") {
  ReplayMemory memory(1);
  memory.push(make_transition(42.0));
  auto batch = memory.sample_minibatch(4);
  REQUIRE(batch.size() == 4);
  for (const auto* t : batch) REQUIRE(t->state(0) == 42.0);

  ReplayMemory empty(1);
  REQUIRE_THROWS_AS(empty.sample_minibatch(1), EmptyMemoryError);
}

TEST_CASE("minibatch sampling is reproducible by seed", "[replay]") {
  auto draw = [](uint32_t seed) {
    ReplayMemory memory(seed);
    for (int i = 0; i < 10; ++i) memory.push(make_transition(double(i)));
    std::vector<double> seen;
    for (const auto* t : memory.sample_minibatch(32))
      seen.push_back(t->state(0));
    return seen;
  };
  REQUIRE(draw(99) == draw(99));
  REQUIRE(draw(99) != draw(100));
}

TEST_CASE("minibatch sampling is uniform", "[replay]") {
  ReplayMemory memory(12345);
  for (int i = 0; i < 10; ++i) memory.push(make_transition(double(i)));
  std::array<int, 10> counts{};
  const int draws = 100000;
  for (const auto* t : memory.sample_minibatch(draws))
    counts[size_t(t->state(0))]++;
  const double expected = draws / 10.0;
  const double sigma = std::sqrt(draws * 0.1 * 0.9);
  for (int c : counts) REQUIRE(std::abs(c - expected) <= 3.0 * sigma);
}

TEST_CASE("smdp accumulation", "[replay]") {
  auto one = accumulate_smdp({-2.5}, 0.7, 1, false);
  REQUIRE(one.accumulated_reward == -2.5);
  REQUIRE(one.dt == 1);
  REQUIRE_FALSE(one.absorbing);

  auto two = accumulate_smdp({1.0, 1.0}, 0.9, 2, false);
  REQUIRE(two.accumulated_reward == Approx(1.9));
  REQUIRE(two.dt == 2);
  REQUIRE(std::pow(0.9, two.dt) == Approx(0.81));

  auto absorbed = accumulate_smdp({1, 1, 1, 1, 1}, 0.5, 5, true);
  REQUIRE(absorbed.absorbing);

  REQUIRE_THROWS_AS(accumulate_smdp({}, 0.9, 0, false), ValidationError);
}

TEST_CASE("smdp accumulation with gamma 1 is the plain sum", "[replay]") {
  std::vector<double> rewards = {0.25, -1.5, 3.0, 0.125};
  auto acc = accumulate_smdp(rewards, 1.0, 4, false);
  double sum = 0.0;
  for (double r : rewards) sum += r;
  REQUIRE(acc.accumulated_reward == sum);
}

TEST_CASE("nearest neighbors ordering and count", "[replay]") {
  ReplayMemory memory(1);
  memory.push(make_transition(2.0));
  memory.push(make_transition(0.0));
  memory.push(make_transition(1.0));

  auto all = memory.nearest_neighbors(Vector::Zero(1), 3);
  REQUIRE(all.size() == 3);
  REQUIRE(all[0]->state(0) == 0.0);
  REQUIRE(all[1]->state(0) == 1.0);
  REQUIRE(all[2]->state(0) == 2.0);

  auto two = memory.nearest_neighbors(Vector::Zero(1), 2);
  REQUIRE(two.size() == 2);
  REQUIRE(two[1]->state(0) == 1.0);

  auto clipped = memory.nearest_neighbors(Vector::Zero(1), 64);
  REQUIRE(clipped.size() == 3);

  ReplayMemory empty(1);
  REQUIRE_THROWS_AS(empty.nearest_neighbors(Vector::Zero(1), 1),
                    EmptyMemoryError);
}

TEST_CASE("nearest neighbor ties break by insertion order", "[replay]") {
  ReplayMemory memory(1);
  memory.push(make_transition(1.0, 10.0));
  memory.push(make_transition(-1.0, 20.0));
  auto nn = memory.nearest_neighbors(Vector::Zero(1), 2);
  REQUIRE(nn[0]->action(0) == 10.0);
  REQUIRE(nn[1]->action(0) == 20.0);
}

TEST_CASE("nearest neighbor distance weights are honored", "[replay]") {
  ReplayMemory memory(1);
  Transition a = make_transition(0.0);
  a.state = Vector(2);
  a.state << 1.0, 0.0;
  a.next_state = a.state;
  a.observation = a.state;
  a.next_observation = a.state;
  memory.push(a);
  Transition b = a;
  b.state << 0.0, 2.0;
  b.next_state = b.state;
  memory.push(b);

  // Unweighted: (1, 0) is closer to the origin. Downweighting the first
  // dimension flips the ordering.
  auto plain = memory.nearest_neighbors(Vector::Zero(2), 1);
  REQUIRE(plain[0]->state(0) == 1.0);
  Vector weights(2);
  weights << 10.0, 0.1;
  auto weighted = memory.nearest_neighbors(Vector::Zero(2), 1, weights);
  REQUIRE(weighted[0]->state(1) == 2.0);
}

TEST_CASE("nearest neighbor distances are nondecreasing", "[replay]") {
  std::mt19937 rng(17);
  std::normal_distribution<double> dist;
  ReplayMemory memory(1);
  for (int i = 0; i < 100; ++i) memory.push(make_transition(dist(rng)));
  Vector query = Vector::Constant(1, dist(rng));
  auto nn = memory.nearest_neighbors(query, 100);
  double prev = -1.0;
  for (const auto* t : nn) {
    const double d = (t->state - query).norm();
    REQUIRE(d >= prev);
    prev = d;
  }
}

TEST_CASE("transition dump is well-formed csv", "[replay]") {
  ReplayMemory memory(1);
  Transition t = make_transition(0.5, -1.0, 2.0);
  t.dt = 3;
  t.terminal = true;
  t.absorbing = true;
  memory.push(t);
  std::ostringstream out;
  dump_transitions(memory, out);
  const std::string text = out.str();
  REQUIRE(text.rfind("s0,a0,abstract_index,reward,sp0,dt,terminal,absorbing\n",
                     0) == 0);
  REQUIRE(text.find("3,1,1") != std::string::npos);
}
