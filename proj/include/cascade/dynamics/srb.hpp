#pragma once

#include <Eigen/Dense>
#include <vector>

#include "cascade/dynamics/tree.hpp"

namespace cascade::dyn {

/// Single-rigid-body template model. Planar state is
/// (theta, cx, cz, thetadot, cxdot, czdot); spatial state is
/// (theta[3], c[3], thetadot[3], cdot[3]) with ZYX Euler angles and
/// Euler-angle rates.
struct SrbParams {
  double mass = 1.0;
  MatrixXd inertia;   // 1x1 (planar) or 3x3 about the CoM
  VectorXd gravity;   // acceleration vector, (0, -g) or (0, 0, -g)
  int num_legs = 0;

  bool planar() const { return gravity.size() == 2; }
  int linear_dim() const { return static_cast<int>(gravity.size()); }
  int angular_dim() const { return planar() ? 1 : 3; }
  int state_dim() const { return 2 * (linear_dim() + angular_dim()); }
  int control_dim() const { return num_legs * linear_dim(); }

  /// SRB abstraction of a whole-body model: total mass and the body-link
  /// inertia, same gravity.
  static SrbParams from_tree(const KinematicTree& tree);
};

struct SrbState {
  VectorXd theta, c, thetadot, cdot;

  VectorXd stacked() const;
  static SrbState from_stacked(const SrbParams& p, const VectorXd& x);
};

/// Continuous-time SRB dynamics. `forces` stacks one ground-force vector per
/// leg; `footholds` the corresponding contact points (world frame); inactive
/// legs contribute nothing. Returns d/dt of the stacked state. Throws
/// SingularityError near the Euler pitch singularity (spatial model only).
VectorXd srb_dynamics(const SrbParams& params, const VectorXd& x, const VectorXd& forces,
                      const std::vector<VectorXd>& footholds, const ContactSet& contacts);

/// Explicit-Euler discrete step x_{k+1} = x_k + f(x_k, u_k) dt.
VectorXd srb_step(const SrbParams& params, const VectorXd& x, const VectorXd& forces,
                  const std::vector<VectorXd>& footholds, const ContactSet& contacts,
                  double dt);

/// Projection of a whole-body state onto the SRB state (base rows of q, qd).
VectorXd project_to_srb(const KinematicTree& tree, const VectorXd& x_wb);

}  // namespace cascade::dyn
