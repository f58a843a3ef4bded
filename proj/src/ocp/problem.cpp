#include "cascade/ocp/problem.hpp"

#include <cmath>

namespace cascade::ocp {

double relaxed_barrier(double z, double delta) {
  if (z > delta) return -std::log(z);
  const double w = (z - 2 * delta) / delta;
  return 0.5 * (w * w - 1.0) - std::log(delta);
}

double relaxed_barrier_d1(double z, double delta) {
  if (z > delta) return -1.0 / z;
  return (z - 2 * delta) / (delta * delta);
}

double relaxed_barrier_d2(double z, double delta) {
  if (z > delta) return 1.0 / (z * z);
  return 1.0 / (delta * delta);
}

}  // namespace cascade::ocp
