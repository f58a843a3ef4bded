#pragma once

#include <Eigen/Dense>
#include <random>
#include <string>

#include "cascade/dynamics/model_io.hpp"

namespace testutil {

inline std::string config_path(const std::string& rel) {
  return std::string(CASCADE_CONFIG_DIR) + "/" + rel;
}

inline cascade::dyn::KinematicTree planar_quadruped() {
  return cascade::dyn::load_model(config_path("robots/planar_quadruped.cfg"));
}

inline cascade::dyn::KinematicTree quadruped3d() {
  return cascade::dyn::load_model(config_path("robots/quadruped3d.cfg"));
}

inline Eigen::VectorXd random_vec(std::mt19937& rng, int n, double scale = 1.0) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = dist(rng);
  return v;
}

inline Eigen::MatrixXd random_mat(std::mt19937& rng, int rows, int cols,
                                  double scale = 1.0) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  Eigen::MatrixXd m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = dist(rng);
  return m;
}

/// Random joint configuration that respects the joint limits and keeps the
/// spatial base away from the Euler singularity.
inline Eigen::VectorXd random_configuration(std::mt19937& rng,
                                            const cascade::dyn::KinematicTree& tree) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Eigen::VectorXd q(tree.nq());
  const int bd = tree.base_dof();
  for (int i = 0; i < bd; ++i) q[i] = dist(rng);
  if (!tree.planar()) q[1] *= 0.4;  // pitch
  for (int j = 0; j < tree.num_joints(); ++j) {
    double lo = tree.qj_lower[j], hi = tree.qj_upper[j];
    std::uniform_real_distribution<double> jd(lo + 0.05 * (hi - lo), hi - 0.05 * (hi - lo));
    q[bd + j] = jd(rng);
  }
  return q;
}

}  // namespace testutil
