#pragma once

#include <Eigen/Dense>

#include "cascade/dynamics/kinematics.hpp"
#include "cascade/dynamics/tree.hpp"

namespace cascade::dyn {

/// Generalized mass matrix M(q), symmetric positive definite.
MatrixXd mass_matrix(const KinematicTree& tree, const VectorXd& q);

/// Gravity part of the bias forces (n at qd = 0). Convention:
/// M qdd + n = B' tau + Jc' Fc.
VectorXd gravity_forces(const KinematicTree& tree, const VectorXd& q);

/// Coriolis, centripetal and gravity forces n(q, qd).
VectorXd bias_forces(const KinematicTree& tree, const VectorXd& q, const VectorXd& qd);

/// Stacked Jacobian of the active contact points (count*contact_dim x nv).
/// An empty active set yields a 0 x nv matrix.
MatrixXd contact_jacobian(const KinematicTree& tree, const VectorXd& q,
                          const ContactSet& contacts);

/// The drift term Jdot(q, qd) * qd of the active contact points.
VectorXd jdot_qdot(const KinematicTree& tree, const VectorXd& q, const VectorXd& qd,
                   const ContactSet& contacts);

struct ContactDynamics {
  VectorXd qdd;
  VectorXd contact_forces;  // stacked per active contact
  double residual = 0.0;    // inf-norm residual of the saddle system
};

/// KKT contact dynamics: solves
///   [M  Jc'] [ qdd]   [B'tau - n          ]
///   [Jc  0 ] [-Fc ] = [-Jdot qd - a Jc qd ]
/// exactly by dense factorization. `baumgarte` is the first-order
/// stabilization gain. Throws SingularityError naming the offending
/// contacts when Jc loses row rank.
ContactDynamics kkt_contact_dynamics(const KinematicTree& tree, const VectorXd& q,
                                     const VectorXd& qd, const VectorXd& tau,
                                     const ContactSet& contacts,
                                     double baumgarte = 10.0);

struct ImpactResult {
  VectorXd qd_plus;
  VectorXd impulses;  // stacked per active contact
  double residual = 0.0;
};

/// Impact map at touchdown: post-impact velocity satisfies
/// M qd+ - Jc' Lambda = M qd- and Jc qd+ = 0; configuration is unchanged.
ImpactResult impact_map(const KinematicTree& tree, const VectorXd& q,
                        const VectorXd& qd_minus, const ContactSet& contacts_new);

/// Kinetic energy 0.5 qd' M qd.
double kinetic_energy(const KinematicTree& tree, const VectorXd& q, const VectorXd& qd);

/// Statics helper: the minimum-norm (R-weighted on tau) torque/force pair
/// with B'tau + Jc'Fc = n(q, 0). Used for standing references and tests.
struct StaticsSolution {
  VectorXd tau;
  VectorXd contact_forces;
};
StaticsSolution gravity_compensation(const KinematicTree& tree, const VectorXd& q,
                                     const ContactSet& contacts,
                                     double tau_weight = 1.0);

}  // namespace cascade::dyn
