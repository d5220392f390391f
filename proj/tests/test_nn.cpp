#include <catch2/catch.hpp>
#include <random>
#include <sstream>

#include "lqrrl/nn.hpp"

using namespace lqrrl;

namespace {

Network zero_network(const NetworkSpec& spec) {
  std::mt19937 rng(0);
  Network net = make_network(spec, rng);
  for (auto& l : net.layers) {
    l.w.setZero();
    l.b.setZero();
  }
  return net;
}

// Central finite differences of output_grad . forward(net, input) with
// respect to every parameter; the independent oracle for backprop.
Grads finite_difference_grads(Network net, const Vector& input,
                              const Vector& output_grad, double h) {
  Grads fd = zero_grads(net);
  auto objective = [&]() { return output_grad.dot(forward(net, input)); };
  for (size_t l = 0; l < net.layers.size(); ++l) {
    for (Eigen::Index i = 0; i < net.layers[l].w.rows(); ++i)
      for (Eigen::Index j = 0; j < net.layers[l].w.cols(); ++j) {
        double& p = net.layers[l].w(i, j);
        const double saved = p;
        p = saved + h;
        const double hi = objective();
        p = saved - h;
        const double lo = objective();
        p = saved;
        fd.dw[l](i, j) = (hi - lo) / (2.0 * h);
      }
    for (Eigen::Index i = 0; i < net.layers[l].b.size(); ++i) {
      double& p = net.layers[l].b(i);
      const double saved = p;
      p = saved + h;
      const double hi = objective();
      p = saved - h;
      const double lo = objective();
      p = saved;
      fd.db[l](i) = (hi - lo) / (2.0 * h);
    }
  }
  return fd;
}

// Relative error that tolerates genuinely tiny gradients.
double rel_err(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-6});
  return std::abs(a - b) / scale;
}

// Pre-activations near the relu kink make finite differences meaningless;
// resample the input until the network is locally smooth.
Vector smooth_input(const Network& net, std::mt19937& rng) {
  std::uniform_real_distribution<double> dist(-1.5, 1.5);
  for (int attempt = 0; attempt < 200; ++attempt) {
    Vector input(net.spec.input_size);
    for (Eigen::Index i = 0; i < input.size(); ++i) input(i) = dist(rng);
    ForwardTrace trace;
    forward(net, input, &trace);
    bool ok = true;
    for (size_t l = 0; l + 1 < trace.pre.size() && ok; ++l)
      for (Eigen::Index i = 0; i < trace.pre[l].size(); ++i)
        if (std::abs(trace.pre[l](i)) < 1e-3) {
          ok = false;
          break;
        }
    if (ok) return input;
  }
  FAIL("could not find an input away from relu kinks");
  return Vector();
}

}  // namespace

TEST_CASE("forward: zero parameters give zero output", "[nn]") {
  NetworkSpec spec{3, {4}, 2};
  Network net = zero_network(spec);
  Vector input(3);
  input << 1.0, -2.0, 0.5;
  REQUIRE(forward(net, input).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("forward: identity linear layer", "[nn]") {
  NetworkSpec spec{3, {}, 3};
  Network net = zero_network(spec);
  net.layers[0].w = Matrix::Identity(3, 3);
  Vector input(3);
  input << 0.3, -1.1, 2.0;
  REQUIRE((forward(net, input) - input).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("forward: tanh output stays strictly inside (-1, 1)", "[nn]") {
  NetworkSpec spec{2, {}, 2, HiddenActivation::relu, OutputActivation::tanh};
  Network net = zero_network(spec);
  net.layers[0].w << 1e6, 0, 0, -1e6;
  Vector input(2);
  input << 5.0, 5.0;
  Vector out = forward(net, input);
  REQUIRE(out(0) < 1.0);
  REQUIRE(out(0) > 0.999);
  REQUIRE(out(1) > -1.0);
  REQUIRE(out(1) < -0.999);
}

TEST_CASE("forward: shape error on wrong input length", "[nn]") {
  NetworkSpec spec{3, {}, 1};
  Network net = zero_network(spec);
  REQUIRE_THROWS_AS(forward(net, Vector::Zero(2)), ShapeError);
}

TEST_CASE("gradient: zero seed gives zero gradients", "[nn]") {
  std::mt19937 rng(1);
  NetworkSpec spec{3, {5}, 2};
  Network net = make_network(spec, rng);
  Grads g = gradient(net, Vector::Ones(3), Vector::Zero(2));
  for (const auto& dw : g.dw) REQUIRE(dw.cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(g.dinput.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gradient: input gradient of a linear layer is W' g", "[nn]") {
  std::mt19937 rng(2);
  NetworkSpec spec{3, {}, 2};
  Network net = make_network(spec, rng);
  Vector og(2);
  og << 1.0, -0.5;
  Grads g = gradient(net, Vector::Ones(3), og);
  Vector expected = net.layers[0].w.transpose() * og;
  REQUIRE((g.dinput - expected).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("gradient: matches central finite differences", "[nn]") {
  std::mt19937 rng(3);
  std::uniform_int_distribution<int> layer_count(0, 2);
  std::uniform_int_distribution<int> width(1, 8);
  std::uniform_int_distribution<int> out_act(0, 1);
  for (int trial = 0; trial < 25; ++trial) {
    NetworkSpec spec;
    spec.input_size = width(rng);
    spec.output_size = width(rng);
    const int layers = layer_count(rng);
    for (int l = 0; l < layers; ++l) spec.hidden_sizes.push_back(width(rng));
    spec.output_activation = OutputActivation(out_act(rng));
    Network net = make_network(spec, rng);
    Vector input = smooth_input(net, rng);
    Vector og(spec.output_size);
    std::normal_distribution<double> dist;
    for (Eigen::Index i = 0; i < og.size(); ++i) og(i) = dist(rng);

    Grads analytic = gradient(net, input, og);
    Grads fd = finite_difference_grads(net, input, og, 1e-5);
    for (size_t l = 0; l < net.layers.size(); ++l) {
      for (Eigen::Index i = 0; i < analytic.dw[l].size(); ++i)
        REQUIRE(rel_err(analytic.dw[l](i), fd.dw[l](i)) < 1e-4);
      for (Eigen::Index i = 0; i < analytic.db[l].size(); ++i)
        REQUIRE(rel_err(analytic.db[l](i), fd.db[l](i)) < 1e-4);
    }
  }
}

TEST_CASE("adam: zero gradient leaves parameters unchanged", "[nn]") {
  std::mt19937 rng(4);
  NetworkSpec spec{2, {3}, 1};
  Network net = make_network(spec, rng);
  Network before = net;
  AdamState state = make_adam(net, 1e-3);
  adam_step(net, zero_grads(net), state);
  for (size_t l = 0; l < net.layers.size(); ++l)
    REQUIRE((net.layers[l].w - before.layers[l].w).cwiseAbs().maxCoeff() <
            1e-15);
}

TEST_CASE("adam: first step moves by about lr * sign(g)", "[nn]") {
  std::mt19937 rng(5);
  NetworkSpec spec{2, {}, 1};
  Network net = make_network(spec, rng);
  Network before = net;
  AdamState state = make_adam(net, 1e-3);
  Grads g = zero_grads(net);
  g.dw[0] << 0.7, -2.0;
  adam_step(net, g, state);
  REQUIRE(net.layers[0].w(0, 0) - before.layers[0].w(0, 0) ==
          Approx(-1e-3).epsilon(0.01));
  REQUIRE(net.layers[0].w(0, 1) - before.layers[0].w(0, 1) ==
          Approx(1e-3).epsilon(0.01));
}

TEST_CASE("adam: identical gradients move identically", "[nn]") {
  std::mt19937 rng(6);
  NetworkSpec spec{2, {}, 1};
  Network net = zero_network(spec);
  AdamState state = make_adam(net, 1e-3);
  Grads g = zero_grads(net);
  g.dw[0] << 1.3, 1.3;
  adam_step(net, g, state);
  REQUIRE(net.layers[0].w(0, 0) == net.layers[0].w(0, 1));
}

TEST_CASE("target update: copy and moving average", "[nn]") {
  NetworkSpec spec{1, {}, 1};
  Network source = zero_network(spec);
  source.layers[0].w << 2.0;
  Network target = zero_network(spec);

  Network t1 = target;
  target_update(t1, source, TargetUpdate::moving_average, 1.0);
  REQUIRE(t1.layers[0].w(0, 0) == 2.0);

  Network t2 = target;
  target_update(t2, source, TargetUpdate::moving_average, 0.0);
  REQUIRE(t2.layers[0].w(0, 0) == 0.0);

  Network t3 = target;
  target_update(t3, source, TargetUpdate::moving_average, 0.5);
  REQUIRE(t3.layers[0].w(0, 0) == 1.0);

  Network t4 = target;
  target_update(t4, source, TargetUpdate::copy);
  REQUIRE(t4.layers[0].w(0, 0) == 2.0);
}

TEST_CASE("forward is deterministic", "[nn]") {
  std::mt19937 rng(7);
  NetworkSpec spec{4, {8, 8}, 2};
  Network net = make_network(spec, rng);
  Vector input(4);
  input << 0.1, -0.2, 0.3, -0.4;
  Vector a = forward(net, input);
  Vector b = forward(net, input);
  REQUIRE((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("serialization round trip", "[nn]") {
  std::mt19937 rng(8);
  NetworkSpec spec{3, {5, 4}, 2, HiddenActivation::relu,
                   OutputActivation::tanh};
  Network net = make_network(spec, rng);
  std::stringstream buffer;
  save_network(net, buffer);
  Network loaded = load_network(buffer);
  REQUIRE(loaded.spec.hidden_sizes == spec.hidden_sizes);
  REQUIRE(loaded.spec.output_activation == spec.output_activation);
  Vector input(3);
  input << 0.5, -0.5, 1.0;
  REQUIRE((forward(net, input) - forward(loaded, input)).cwiseAbs().maxCoeff() ==
          0.0);
}
