#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "cascade/support/error.hpp"

namespace cascade::dyn {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class JointType { FloatingBasePlanar, FloatingBaseEuler, Revolute };

/// One rigid link: inertial data expressed in the link frame.
/// Planar trees use 2-vectors and scalar (1x1) rotational inertia,
/// spatial trees use 3-vectors and a 3x3 inertia about the CoM.
struct Link {
  std::string name;
  double mass = 0.0;
  VectorXd com;      // CoM offset in link frame
  MatrixXd inertia;  // rotational inertia about CoM
};

/// Joint i connects links[i] to its parent. The placement transform locates
/// the joint frame in the parent frame; the link frame coincides with the
/// joint frame rotated by the joint coordinate(s).
struct Joint {
  JointType type = JointType::Revolute;
  int parent = -1;             // parent link index, -1 = world (root only)
  VectorXd placement_pos;      // joint origin in parent frame
  MatrixXd placement_rot;      // joint frame orientation in parent frame
  Eigen::Vector3d axis{0, 1, 0};  // revolute axis in joint frame (3D trees)
};

struct EndEffector {
  std::string name;
  int link = -1;
  VectorXd offset;  // point in link frame
};

/// Stance flags, one per end effector. active[j] == 1 means foot j is in
/// contact (the paper's s̃_j); swing status is the complement.
struct ContactSet {
  std::vector<uint8_t> active;

  ContactSet() = default;
  explicit ContactSet(std::vector<uint8_t> flags) : active(std::move(flags)) {}
  static ContactSet none(int n_ee) { return ContactSet(std::vector<uint8_t>(n_ee, 0)); }
  static ContactSet all(int n_ee) { return ContactSet(std::vector<uint8_t>(n_ee, 1)); }

  int count() const {
    int c = 0;
    for (auto f : active) c += (f != 0);
    return c;
  }
  bool operator==(const ContactSet& other) const { return active == other.active; }
};

/// Robot structure: links, joints, end effectors, actuation and limits.
///
/// Coordinate layout: base pose first (planar: [theta, cx, cz]; spatial:
/// [roll, pitch, yaw, cx, cy, cz] with ZYX Euler angles), followed by one
/// angle per revolute joint in link order. Generalized velocities share the
/// layout (Euler-angle rates for the spatial base).
class KinematicTree {
 public:
  std::string name;
  std::vector<Link> links;
  std::vector<Joint> joints;  // joints[i] drives links[i]
  std::vector<EndEffector> end_effectors;

  VectorXd tau_lower, tau_upper;        // per actuated joint
  VectorXd qj_lower, qj_upper;          // joint angle limits
  VectorXd qdj_lower, qdj_upper;        // joint speed limits
  double friction_mu = 0.5;
  VectorXd gravity;                     // acceleration vector, e.g. (0, -9.81)

  bool planar() const { return planar_; }
  int nq() const { return nq_; }
  int nv() const { return nq_; }
  int base_dof() const { return planar_ ? 3 : 6; }
  int num_joints() const { return nq_ - base_dof(); }
  int num_links() const { return static_cast<int>(links.size()); }
  int num_ees() const { return static_cast<int>(end_effectors.size()); }
  int angular_dim() const { return planar_ ? 1 : 3; }
  int linear_dim() const { return planar_ ? 2 : 3; }
  int contact_dim() const { return planar_ ? 2 : 3; }

  /// Offset of joint i's coordinates in q.
  int joint_dof_offset(int joint) const { return dof_offset_[joint]; }
  int joint_dof_count(int joint) const {
    switch (joints[joint].type) {
      case JointType::FloatingBasePlanar: return 3;
      case JointType::FloatingBaseEuler: return 6;
      case JointType::Revolute: return 1;
    }
    return 0;
  }

  double total_mass() const {
    double m = 0;
    for (const auto& l : links) m += l.mass;
    return m;
  }

  /// Maps actuated-joint torques to generalized forces (B_tau' * tau).
  VectorXd expand_torque(const VectorXd& tau) const {
    if (tau.size() != num_joints())
      throw DimensionError("torque vector", num_joints(), static_cast<int>(tau.size()));
    VectorXd full = VectorXd::Zero(nv());
    full.tail(num_joints()) = tau;
    return full;
  }

  void check_coordinates(const VectorXd& q) const {
    if (q.size() != nq())
      throw DimensionError("generalized coordinates", nq(), static_cast<int>(q.size()));
  }

  /// Validates structural invariants; throws ModelError on violation.
  /// Called by the loader and by finalize().
  void finalize();

 private:
  bool planar_ = true;
  int nq_ = 0;
  std::vector<int> dof_offset_;
};

/// Whole-body state (q, qdot).
struct WholeBodyState {
  VectorXd q;
  VectorXd qd;

  WholeBodyState() = default;
  WholeBodyState(VectorXd q_in, VectorXd qd_in)
      : q(std::move(q_in)), qd(std::move(qd_in)) {
    if (q.size() != qd.size())
      throw DimensionError("whole-body state velocity", static_cast<int>(q.size()),
                           static_cast<int>(qd.size()));
  }

  VectorXd stacked() const {
    VectorXd x(q.size() + qd.size());
    x << q, qd;
    return x;
  }
  static WholeBodyState from_stacked(const VectorXd& x) {
    int n = static_cast<int>(x.size()) / 2;
    return WholeBodyState(x.head(n), x.tail(n));
  }
};

}  // namespace cascade::dyn
