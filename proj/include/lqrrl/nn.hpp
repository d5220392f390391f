#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <random>
#include <vector>

#include "lqrrl/linalg.hpp"

// Feedforward networks with manual backpropagation. Only what the learners
// need: ReLU hidden layers, linear or tanh output, Adam, and the two target
// update styles (periodic copy, moving average).

namespace lqrrl {

enum class HiddenActivation : uint8_t { relu = 0 };
enum class OutputActivation : uint8_t { linear = 0, tanh = 1 };

struct NetworkSpec {
  int input_size = 1;
  std::vector<int> hidden_sizes;
  int output_size = 1;
  HiddenActivation hidden_activation = HiddenActivation::relu;
  OutputActivation output_activation = OutputActivation::linear;
};

// One dense layer; weights are (out x in), row per output unit.
struct Layer {
  Matrix w;
  Vector b;
};

struct Network {
  NetworkSpec spec;
  std::vector<Layer> layers;

  int parameter_count() const {
    int n = 0;
    for (const auto& l : layers) n += int(l.w.size() + l.b.size());
    return n;
  }
};

// Parameter-shaped gradient container, plus the gradient w.r.t. the input
// (the actor update needs d(critic)/d(action)).
struct Grads {
  std::vector<Matrix> dw;
  std::vector<Vector> db;
  Vector dinput;
};

using TargetNetwork = Network;

namespace detail {

inline std::vector<int> layer_sizes(const NetworkSpec& spec) {
  std::vector<int> sizes;
  sizes.push_back(spec.input_size);
  for (int h : spec.hidden_sizes) sizes.push_back(h);
  sizes.push_back(spec.output_size);
  return sizes;
}

// tanh must stay strictly inside (-1, 1); std::tanh saturates to exactly
// +/-1 for large arguments.
inline double open_tanh(double x) {
  const double limit = std::nextafter(1.0, 0.0);
  double t = std::tanh(x);
  if (t >= 1.0) return limit;
  if (t <= -1.0) return -limit;
  return t;
}

}  // namespace detail

inline void validate_spec(const NetworkSpec& spec) {
  if (spec.input_size < 1 || spec.output_size < 1)
    throw ShapeError("network: input and output sizes must be >= 1");
  for (int h : spec.hidden_sizes)
    if (h < 1) throw ShapeError("network: hidden sizes must be >= 1");
}

// Uniform +/- 1/sqrt(fan_in) init for weights and biases.
inline Network make_network(const NetworkSpec& spec, std::mt19937& rng) {
  validate_spec(spec);
  Network net;
  net.spec = spec;
  auto sizes = detail::layer_sizes(spec);
  for (size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int in = sizes[l], out = sizes[l + 1];
    const double bound = 1.0 / std::sqrt(double(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Layer layer;
    layer.w = Matrix(out, in);
    layer.b = Vector(out);
    for (int i = 0; i < out; ++i) {
      for (int j = 0; j < in; ++j) layer.w(i, j) = dist(rng);
      layer.b(i) = dist(rng);
    }
    net.layers.push_back(std::move(layer));
  }
  return net;
}

struct ForwardTrace {
  std::vector<Vector> pre;   // pre-activation per layer
  std::vector<Vector> post;  // post-activation; post[0] is the input
};

inline Vector forward(const Network& net, const Vector& input,
                      ForwardTrace* trace = nullptr) {
  if (input.size() != net.spec.input_size)
    throw ShapeError("forward: input length mismatch");
  if (trace) {
    trace->pre.clear();
    trace->post.clear();
    trace->post.push_back(input);
  }
  Vector x = input;
  const size_t n_layers = net.layers.size();
  for (size_t l = 0; l < n_layers; ++l) {
    Vector z = net.layers[l].w * x + net.layers[l].b;
    if (trace) trace->pre.push_back(z);
    const bool last = (l + 1 == n_layers);
    if (!last) {
      x = z.cwiseMax(0.0);  // relu
    } else if (net.spec.output_activation == OutputActivation::tanh) {
      x = z.unaryExpr([](double v) { return detail::open_tanh(v); });
    } else {
      x = z;
    }
    if (trace) trace->post.push_back(x);
  }
  return x;
}

// Backpropagates output_grad (the gradient of some scalar objective w.r.t.
// the network output) through the network, returning gradients for every
// parameter and for the input.
inline Grads gradient(const Network& net, const Vector& input,
                      const Vector& output_grad) {
  if (output_grad.size() != net.spec.output_size)
    throw ShapeError("gradient: output_grad length mismatch");
  ForwardTrace trace;
  forward(net, input, &trace);

  const size_t n_layers = net.layers.size();
  Grads g;
  g.dw.resize(n_layers);
  g.db.resize(n_layers);

  Vector delta = output_grad;
  if (net.spec.output_activation == OutputActivation::tanh) {
    const Vector& out = trace.post.back();
    delta = delta.cwiseProduct(Vector::Ones(out.size()) - out.cwiseProduct(out));
  }
  for (size_t l = n_layers; l-- > 0;) {
    g.dw[l] = delta * trace.post[l].transpose();
    g.db[l] = delta;
    Vector upstream = net.layers[l].w.transpose() * delta;
    if (l > 0) {
      // relu derivative on the previous layer's pre-activation
      const Vector& z = trace.pre[l - 1];
      for (Eigen::Index i = 0; i < upstream.size(); ++i)
        if (z(i) <= 0.0) upstream(i) = 0.0;
    }
    delta = (l > 0) ? upstream : Vector();
    if (l == 0) g.dinput = std::move(upstream);
  }
  return g;
}

inline Grads zero_grads(const Network& net) {
  Grads g;
  for (const auto& layer : net.layers) {
    g.dw.push_back(Matrix::Zero(layer.w.rows(), layer.w.cols()));
    g.db.push_back(Vector::Zero(layer.b.size()));
  }
  g.dinput = Vector::Zero(net.spec.input_size);
  return g;
}

inline void add_scaled(Grads& acc, const Grads& g, double scale) {
  for (size_t l = 0; l < acc.dw.size(); ++l) {
    acc.dw[l] += scale * g.dw[l];
    acc.db[l] += scale * g.db[l];
  }
}

struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_num = 1e-8;
  long step = 0;
  std::vector<Matrix> mw, vw;
  std::vector<Vector> mb, vb;
};

inline AdamState make_adam(const Network& net, double learning_rate) {
  AdamState s;
  s.learning_rate = learning_rate;
  for (const auto& layer : net.layers) {
    s.mw.push_back(Matrix::Zero(layer.w.rows(), layer.w.cols()));
    s.vw.push_back(Matrix::Zero(layer.w.rows(), layer.w.cols()));
    s.mb.push_back(Vector::Zero(layer.b.size()));
    s.vb.push_back(Vector::Zero(layer.b.size()));
  }
  return s;
}

// Standard bias-corrected Adam, descending along `grads`.
inline void adam_step(Network& net, const Grads& grads, AdamState& state) {
  if (grads.dw.size() != net.layers.size())
    throw ShapeError("adam_step: gradient shape mismatch");
  state.step += 1;
  const double c1 = 1.0 - std::pow(state.beta1, double(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, double(state.step));
  for (size_t l = 0; l < net.layers.size(); ++l) {
    auto& mw = state.mw[l];
    auto& vw = state.vw[l];
    mw = state.beta1 * mw + (1.0 - state.beta1) * grads.dw[l];
    vw = state.beta2 * vw + (1.0 - state.beta2) * grads.dw[l].cwiseProduct(grads.dw[l]);
    net.layers[l].w.array() -=
        state.learning_rate * (mw.array() / c1) /
        ((vw.array() / c2).sqrt() + state.eps_num);

    auto& mb = state.mb[l];
    auto& vb = state.vb[l];
    mb = state.beta1 * mb + (1.0 - state.beta1) * grads.db[l];
    vb = state.beta2 * vb + (1.0 - state.beta2) * grads.db[l].cwiseProduct(grads.db[l]);
    net.layers[l].b.array() -=
        state.learning_rate * (mb.array() / c1) /
        ((vb.array() / c2).sqrt() + state.eps_num);
  }
}

enum class TargetUpdate { copy, moving_average };

inline void target_update(TargetNetwork& target, const Network& source,
                          TargetUpdate mode, double mix = 1.0) {
  if (target.layers.size() != source.layers.size())
    throw ShapeError("target_update: layer count mismatch");
  if (mode == TargetUpdate::copy) mix = 1.0;
  if (mix < 0.0 || mix > 1.0)
    throw ValidationError("target_update: mix must be in [0, 1]");
  for (size_t l = 0; l < target.layers.size(); ++l) {
    auto& t = target.layers[l];
    const auto& s = source.layers[l];
    if (t.w.rows() != s.w.rows() || t.w.cols() != s.w.cols())
      throw ShapeError("target_update: layer shape mismatch");
    t.w = (1.0 - mix) * t.w + mix * s.w;
    t.b = (1.0 - mix) * t.b + mix * s.b;
  }
}

inline bool parameters_finite(const Network& net) {
  for (const auto& l : net.layers)
    if (!l.w.allFinite() || !l.b.allFinite()) return false;
  return true;
}

// --- flat binary serialization ---------------------------------------------
// Header: magic "LQRNN1", little-endian u32 counts (input, #hidden, hidden
// sizes..., output), activation enums as single bytes, then f64 parameters
// per layer: weights row-major, then biases.

static_assert(std::endian::native == std::endian::little,
              "network files are little-endian");

namespace detail {

inline void write_u32(std::ostream& out, uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline uint32_t read_u32(std::istream& in) {
  uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

}  // namespace detail

inline void save_network(const Network& net, std::ostream& out) {
  out.write("LQRNN1", 6);
  detail::write_u32(out, uint32_t(net.spec.input_size));
  detail::write_u32(out, uint32_t(net.spec.hidden_sizes.size()));
  for (int h : net.spec.hidden_sizes) detail::write_u32(out, uint32_t(h));
  detail::write_u32(out, uint32_t(net.spec.output_size));
  const uint8_t ha = uint8_t(net.spec.hidden_activation);
  const uint8_t oa = uint8_t(net.spec.output_activation);
  out.write(reinterpret_cast<const char*>(&ha), 1);
  out.write(reinterpret_cast<const char*>(&oa), 1);
  for (const auto& l : net.layers) {
    out.write(reinterpret_cast<const char*>(l.w.data()),
              std::streamsize(sizeof(double) * l.w.size()));
    out.write(reinterpret_cast<const char*>(l.b.data()),
              std::streamsize(sizeof(double) * l.b.size()));
  }
  if (!out) throw IoError("save_network: write failed");
}

inline Network load_network(std::istream& in) {
  char magic[6];
  in.read(magic, 6);
  if (!in || std::string(magic, 6) != "LQRNN1")
    throw IoError("load_network: bad magic");
  NetworkSpec spec;
  spec.input_size = int(detail::read_u32(in));
  const uint32_t n_hidden = detail::read_u32(in);
  for (uint32_t i = 0; i < n_hidden; ++i)
    spec.hidden_sizes.push_back(int(detail::read_u32(in)));
  spec.output_size = int(detail::read_u32(in));
  uint8_t ha = 0, oa = 0;
  in.read(reinterpret_cast<char*>(&ha), 1);
  in.read(reinterpret_cast<char*>(&oa), 1);
  spec.hidden_activation = HiddenActivation(ha);
  spec.output_activation = OutputActivation(oa);
  validate_spec(spec);

  Network net;
  net.spec = spec;
  auto sizes = detail::layer_sizes(spec);
  for (size_t l = 0; l + 1 < sizes.size(); ++l) {
    Layer layer;
    layer.w = Matrix(sizes[l + 1], sizes[l]);
    layer.b = Vector(sizes[l + 1]);
    in.read(reinterpret_cast<char*>(layer.w.data()),
            std::streamsize(sizeof(double) * layer.w.size()));
    in.read(reinterpret_cast<char*>(layer.b.data()),
            std::streamsize(sizeof(double) * layer.b.size()));
    net.layers.push_back(std::move(layer));
  }
  if (!in) throw IoError("load_network: truncated file");
  return net;
}

}  // namespace lqrrl
