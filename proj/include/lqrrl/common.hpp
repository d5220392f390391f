#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace lqrrl {

// Error taxonomy. Everything derives from std::runtime_error so callers that
// only care about "this run blew up" can catch one type.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SingularityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct RiccatiDivergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EmptyMemoryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct StatisticsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SimulationDiverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  const double two_pi = 2.0 * M_PI;
  a = std::fmod(a, two_pi);
  if (a <= -M_PI) a += two_pi;
  if (a > M_PI) a -= two_pi;
  return a;
}

}  // namespace lqrrl
