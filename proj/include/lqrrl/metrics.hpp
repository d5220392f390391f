#pragma once

#include <cmath>
#include <vector>

#include "lqrrl/common.hpp"

// Learning-curve metrics: rise time, end performance, Student-t confidence
// intervals and the trailing moving average used for smoothed curves.

namespace lqrrl {

struct EpisodeRecord {
  int run = 0;
  int episode = 0;
  double sim_time_s = 0.0;  // cumulative simulated time at episode end
  double episode_return = 0.0;  // unscaled
  int steps = 0;
};

struct LearningCurve {
  std::vector<EpisodeRecord> episodes;
};

namespace detail {

// Regularized incomplete beta function via Lentz's continued fraction.
inline double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) -
                          std::lgamma(b) + a * std::log(x) +
                          b * std::log(1.0 - x);
  const bool swap = x > (a + 1.0) / (a + b + 2.0);
  if (swap) return 1.0 - incomplete_beta(b, a, 1.0 - x);

  const double tiny = 1e-300;
  double c = 1.0, d = 1.0 - (a + b) * x / (a + 1.0);
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double result = d;
  for (int m = 1; m <= 300; ++m) {
    const double dm = double(m);
    double numerator = dm * (b - dm) * x / ((a + 2.0 * dm - 1.0) * (a + 2.0 * dm));
    d = 1.0 + numerator * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + numerator / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    result *= d * c;
    numerator = -(a + dm) * (a + b + dm) * x /
                ((a + 2.0 * dm) * (a + 2.0 * dm + 1.0));
    d = 1.0 + numerator * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + numerator / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    result *= delta;
    if (std::abs(delta - 1.0) < 1e-14) break;
  }
  return std::exp(ln_front) * result / a;
}

inline double student_t_cdf(double x, int dof) {
  const double v = double(dof);
  const double ib = incomplete_beta(v / 2.0, 0.5, v / (v + x * x));
  return x >= 0.0 ? 1.0 - 0.5 * ib : 0.5 * ib;
}

}  // namespace detail

// Upper quantile of the Student t distribution by bisection on the CDF.
inline double student_t_quantile(double p, int dof) {
  if (dof < 1) throw StatisticsError("student_t_quantile: dof must be >= 1");
  if (p <= 0.0 || p >= 1.0)
    throw StatisticsError("student_t_quantile: p must be in (0, 1)");
  if (p == 0.5) return 0.0;
  double lo = -1e3, hi = 1e3;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (detail::student_t_cdf(mid, dof) < p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

struct Interval {
  double mean = 0.0;
  double halfwidth = 0.0;
};

// mean +/- t(0.975, n-1) * stddev / sqrt(n).
inline Interval confidence_interval(const std::vector<double>& samples) {
  if (samples.size() < 2)
    throw StatisticsError("confidence_interval: need at least 2 samples");
  const double n = double(samples.size());
  double mean = 0.0;
  for (double s : samples) mean += s;
  mean /= n;
  double variance = 0.0;
  for (double s : samples) variance += (s - mean) * (s - mean);
  variance /= n;
  const double t = student_t_quantile(0.975, int(samples.size()) - 1);
  return {mean, t * std::sqrt(variance) / std::sqrt(n)};
}

struct RiseTime {
  double seconds = 0.0;
  bool censored = false;
};

// Simulated time at the end of the first episode opening a streak of 3
// consecutive returns strictly above the threshold; censored at the total
// simulated time when no streak exists.
inline RiseTime rise_time(const LearningCurve& curve, double threshold) {
  if (curve.episodes.empty())
    throw StatisticsError("rise_time: empty learning curve");
  const auto& eps = curve.episodes;
  for (size_t i = 0; i + 2 < eps.size(); ++i) {
    if (eps[i].episode_return > threshold &&
        eps[i + 1].episode_return > threshold &&
        eps[i + 2].episode_return > threshold)
      return {eps[i].sim_time_s, false};
  }
  return {eps.back().sim_time_s, true};
}

// Mean return over the final ceil(10%) of the episodes.
inline double end_performance(const LearningCurve& curve) {
  if (curve.episodes.empty())
    throw StatisticsError("end_performance: empty learning curve");
  const size_t n = curve.episodes.size();
  const size_t window = size_t(std::ceil(0.10 * double(n)));
  double sum = 0.0;
  for (size_t i = n - window; i < n; ++i)
    sum += curve.episodes[i].episode_return;
  return sum / double(window);
}

// Trailing moving average; entry i averages the window ending at i, at most
// `window` samples wide.
inline std::vector<double> trailing_moving_average(
    const std::vector<double>& values, int window) {
  std::vector<double> out(values.size());
  double sum = 0.0;
  for (size_t i = 0; i < values.size(); ++i) {
    sum += values[i];
    if (i >= size_t(window)) sum -= values[i - size_t(window)];
    const size_t width = std::min(i + 1, size_t(window));
    out[i] = sum / double(width);
  }
  return out;
}

}  // namespace lqrrl
