#pragma once

#include "cascade/dynamics/rigid_body.hpp"
#include "cascade/mpc/schedule.hpp"

namespace cascade::sim {

using Eigen::VectorXd;

/// A velocity change applied over a time window (push emulation).
struct Disturbance {
  double time = 0.0;
  double window = 0.05;
  VectorXd delta_v;  // applied to the base linear coordinates
};

/// Rigid-body world stepped by semi-implicit integration of the KKT contact
/// dynamics; contact switching is time driven from the schedule with the
/// impact map applied at touchdowns.
class SimWorld {
 public:
  SimWorld(const dyn::KinematicTree& tree, const mpc::ContactSchedule& schedule,
           double sim_dt = 1e-3, double baumgarte = 10.0, double ground_height = 0.0);

  void reset(const VectorXd& q, const VectorXd& qd, double t = 0.0);

  /// Advances one sim step under held torques. Applies schedule-driven
  /// impacts at mode changes and any active disturbances first.
  void step(const VectorXd& tau);

  void add_disturbance(const Disturbance& d) { disturbances_.push_back(d); }

  double time() const { return t_; }
  const VectorXd& q() const { return q_; }
  const VectorXd& qd() const { return qd_; }
  VectorXd state() const {
    VectorXd x(2 * q_.size());
    x << q_, qd_;
    return x;
  }
  const dyn::ContactSet& contacts() const { return contacts_; }
  const dyn::KinematicTree& tree() const { return tree_; }
  double sim_dt() const { return dt_; }
  double ground_height() const { return ground_; }

  /// Energy injected by the last impact (should never be positive) and the
  /// touchdown foot-height mismatch, for physics-sanity accounting.
  double last_impact_energy_gain() const { return impact_energy_gain_; }
  double last_touchdown_height_error() const { return touchdown_height_error_; }
  bool impact_occurred() const { return impact_occurred_; }

 private:
  dyn::KinematicTree tree_;
  mpc::ContactSchedule schedule_;
  double dt_;
  double baumgarte_;
  double ground_;
  double t_ = 0.0;
  VectorXd q_, qd_;
  dyn::ContactSet contacts_;
  std::vector<Disturbance> disturbances_;
  double impact_energy_gain_ = 0.0;
  double touchdown_height_error_ = 0.0;
  bool impact_occurred_ = false;
};

}  // namespace cascade::sim
