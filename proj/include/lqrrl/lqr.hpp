#pragma once

#include <cstdio>
#include <optional>
#include <ostream>

#include "lqrrl/environment.hpp"
#include "lqrrl/replay.hpp"

// Linear model acquisition (locally linear regression on stored transitions,
// or finite differences of the true plant), the discrete algebraic Riccati
// solve, and the resulting state-feedback regulator.

namespace lqrrl {

// Discrete-time model s' = A s + B a + E around the goal.
struct LinearModel {
  Matrix a;
  Matrix b;
  Vector e;
  Vector origin;  // s_d
};

struct LqrController {
  Matrix riccati_p;
  Matrix gain;         // F, action_dim x state_dim
  Vector feedforward;  // a_ff
  Vector goal;
  Vector action_min, action_max;
  std::vector<int> angle_dims;

  // a = -F (s - s_d) + a_ff, clamped to the action bounds. Angle deviations
  // are wrapped so the regulator sees the short way around.
  Vector control(const Vector& state) const {
    Vector dev = state - goal;
    for (int d : angle_dims) dev(d) = wrap_angle(dev(d));
    Vector a = -(gain * dev) + feedforward;
    return a.cwiseMax(action_min).cwiseMin(action_max);
  }
};

// Fits s' = A s + B a + E to the k stored transitions nearest the goal.
// Rows of the regression are [s - s_d, a, 1] -> [s' - s], so the fitted map
// is a local increment model; A picks up the +I term. Returns nothing when
// the memory holds fewer than k transitions (the caller falls back to its
// base policy).
inline std::optional<LinearModel> fit_llr_model(
    const ReplayMemory& memory, const Vector& goal, size_t k,
    double ridge_rel, const std::vector<int>& angle_dims = {},
    const Vector& distance_weights = Vector()) {
  if (memory.size() < k) return std::nullopt;
  const auto neighbors = memory.nearest_neighbors(goal, k, distance_weights);
  const int n = int(goal.size());
  const int m = int(neighbors.front()->action.size());

  Matrix inputs(neighbors.size(), n + m + 1);
  Matrix outputs(neighbors.size(), n);
  for (size_t i = 0; i < neighbors.size(); ++i) {
    const Transition& t = *neighbors[i];
    Vector dev = t.state - goal;
    Vector delta = t.next_state - t.state;
    for (int d : angle_dims) {
      dev(d) = wrap_angle(dev(d));
      delta(d) = wrap_angle(delta(d));
    }
    inputs.block(i, 0, 1, n) = dev.transpose();
    inputs.block(i, n, 1, m) = t.action.transpose();
    inputs(i, n + m) = 1.0;
    outputs.row(i) = delta.transpose();
  }

  const Matrix gram = inputs.transpose() * inputs;
  const double ridge = ridge_rel * gram.diagonal().maxCoeff();
  const Matrix x = solve_regularized_normal(inputs, outputs, ridge);

  LinearModel model;
  model.origin = goal;
  const Matrix xt = x.transpose();  // n x (n+m+1)
  model.a = xt.block(0, 0, n, n) + Matrix::Identity(n, n);
  model.b = xt.block(0, n, n, m);
  // Bias column gives the increment at s = s_d, a = 0; expressed in global
  // coordinates the constant term is bias - M_s * s_d.
  model.e = xt.col(n + m) - xt.block(0, 0, n, n) * goal;
  return model;
}

// Central finite differences of the plant's one-step map around (s_d, 0).
inline LinearModel linearize_true(const Environment& env, const Vector& goal,
                                  double h = 1e-5) {
  const int n = env.spec().state_dim;
  const int m = env.spec().action_dim;
  const Vector zero_action = Vector::Zero(m);
  LinearModel model;
  model.origin = goal;
  model.a = Matrix(n, n);
  model.b = Matrix(n, m);
  for (int j = 0; j < n; ++j) {
    Vector hi = goal, lo = goal;
    hi(j) += h;
    lo(j) -= h;
    model.a.col(j) =
        (env.next_state(hi, zero_action) - env.next_state(lo, zero_action)) /
        (2.0 * h);
  }
  for (int j = 0; j < m; ++j) {
    Vector hi = zero_action, lo = zero_action;
    hi(j) += h;
    lo(j) -= h;
    model.b.col(j) =
        (env.next_state(goal, hi) - env.next_state(goal, lo)) / (2.0 * h);
  }
  // Constant term so the affine model is exact at the expansion point.
  model.e = env.next_state(goal, zero_action) - model.a * goal;
  if (!all_finite(model.a) || !all_finite(model.b) || !all_finite(model.e))
    throw SimulationDiverged("linearize_true: divergent step");
  return model;
}

// Fixed-point iteration for the discrete algebraic Riccati equation
//   P = A'PA - (A'PB)(D + B'PB)^-1 (B'PA) + C
// starting from P = C. Non-convergence doubles as a stabilizability check.
inline Matrix solve_dare(const Matrix& a, const Matrix& b, const Matrix& c,
                         const Matrix& d, double tol = 1e-10,
                         long max_iterations = 100000) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || b.rows() != n || c.rows() != n || c.cols() != n ||
      d.rows() != b.cols() || d.cols() != b.cols())
    throw ShapeError("solve_dare: inconsistent matrix shapes");

  Matrix p = c;
  for (long it = 0; it < max_iterations; ++it) {
    const Matrix apb = a.transpose() * p * b;
    const Matrix inner = d + b.transpose() * p * b;
    Eigen::LLT<Matrix> llt(inner);
    if (llt.info() != Eigen::Success)
      throw RiccatiDivergence("solve_dare: D + B'PB not positive definite");
    Matrix next = a.transpose() * p * a - apb * llt.solve(apb.transpose()) + c;
    // Rounding asymmetry grows geometrically through an unstable A; keep the
    // iterate exactly symmetric.
    next = 0.5 * (next + Matrix(next.transpose()));
    const double diff = (next - p).cwiseAbs().maxCoeff();
    const double scale = 1.0 + p.cwiseAbs().maxCoeff();
    p = std::move(next);
    if (diff < tol * scale) return p;
  }
  throw RiccatiDivergence("solve_dare: no fixed point within iteration budget");
}

inline double riccati_residual(const Matrix& a, const Matrix& b,
                               const Matrix& c, const Matrix& d,
                               const Matrix& p) {
  const Matrix apb = a.transpose() * p * b;
  const Matrix inner = d + b.transpose() * p * b;
  const Matrix res = p - (a.transpose() * p * a -
                          apb * inner.llt().solve(apb.transpose()) + c);
  return res.cwiseAbs().maxCoeff();
}

struct ControllerOptions {
  // The feedforward solves B a_ff = -(one-step drift at the goal) so the
  // goal becomes an equilibrium. The literal variant keeps the drift sign
  // uninverted for fidelity experiments.
  bool literal_feedforward = false;
  Vector action_min, action_max;
  std::vector<int> angle_dims;
};

inline LqrController build_controller(const LinearModel& model,
                                      const Vector& cost_state_diag,
                                      const Vector& cost_action_diag,
                                      const ControllerOptions& options) {
  const Matrix c = Matrix(cost_state_diag.asDiagonal());
  const Matrix d = Matrix(cost_action_diag.asDiagonal());
  LqrController ctrl;
  ctrl.riccati_p = solve_dare(model.a, model.b, c, d);
  const Matrix inner = d + model.b.transpose() * ctrl.riccati_p * model.b;
  ctrl.gain = inner.llt().solve(model.b.transpose() * ctrl.riccati_p * model.a);
  const Vector drift = model.a * model.origin + model.e - model.origin;
  ctrl.feedforward = least_squares_min_norm(
      model.b, options.literal_feedforward ? drift : Vector(-drift));
  ctrl.goal = model.origin;
  ctrl.action_min = options.action_min;
  ctrl.action_max = options.action_max;
  ctrl.angle_dims = options.angle_dims;
  return ctrl;
}

inline LqrController build_controller(const LinearModel& model,
                                      const Environment& env,
                                      bool literal_feedforward = false) {
  ControllerOptions options;
  options.literal_feedforward = literal_feedforward;
  options.action_min = env.spec().action_min;
  options.action_max = env.spec().action_max;
  options.angle_dims = env.spec().angle_dims;
  return build_controller(model, env.spec().cost_state_diag,
                          env.spec().cost_action_diag, options);
}

// Diagnostic CSV blocks: one row per matrix row, tagged with the refit index.
inline void dump_controller(const LinearModel& model,
                            const LqrController& ctrl, int refit_index,
                            std::ostream& out) {
  char buf[32];
  auto row = [&](const char* tag, const Vector& values, int r) {
    out << refit_index << "," << tag << "," << r;
    for (Eigen::Index i = 0; i < values.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", values(i));
      out << "," << buf;
    }
    out << "\n";
  };
  for (Eigen::Index r = 0; r < model.a.rows(); ++r)
    row("A", model.a.row(r).transpose(), int(r));
  for (Eigen::Index r = 0; r < model.b.rows(); ++r)
    row("B", model.b.row(r).transpose(), int(r));
  row("E", model.e, 0);
  for (Eigen::Index r = 0; r < ctrl.riccati_p.rows(); ++r)
    row("P", ctrl.riccati_p.row(r).transpose(), int(r));
  for (Eigen::Index r = 0; r < ctrl.gain.rows(); ++r)
    row("F", ctrl.gain.row(r).transpose(), int(r));
  row("a_ff", ctrl.feedforward, 0);
}

}  // namespace lqrrl
