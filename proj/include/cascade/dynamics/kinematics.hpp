#pragma once

#include <Eigen/Dense>
#include <vector>

#include "cascade/dynamics/tree.hpp"

namespace cascade::dyn {

/// World pose of every link frame plus per-joint data used for Jacobians.
struct FrameSet {
  std::vector<MatrixXd> rot;        // world <- link
  std::vector<VectorXd> pos;        // link frame origin in world
  std::vector<VectorXd> joint_pos;  // joint origin in world
  std::vector<Eigen::Vector3d> joint_axis_world;  // revolute axis (3D only)
};

struct EEPose {
  VectorXd position;
  MatrixXd orientation;
};

FrameSet compute_frames(const KinematicTree& tree, const VectorXd& q);

/// World positions and orientations of all end effectors.
std::vector<EEPose> forward_kinematics(const KinematicTree& tree, const VectorXd& q);

/// Position of a single end effector.
VectorXd ee_position(const KinematicTree& tree, const FrameSet& frames, int ee);

/// Translational Jacobian of a world point attached to `link`
/// (linear_dim x nv). `frames` must come from the same q.
MatrixXd point_jacobian(const KinematicTree& tree, const VectorXd& q,
                        const FrameSet& frames, int link, const VectorXd& world_point);

/// Angular Jacobian of `link` (angular_dim x nv). Planar rows are the scalar
/// rotation rate.
MatrixXd angular_jacobian(const KinematicTree& tree, const VectorXd& q,
                          const FrameSet& frames, int link);

/// World CoM position of a link.
VectorXd link_com_world(const KinematicTree& tree, const FrameSet& frames, int link);

/// World velocity of an end effector point.
VectorXd ee_velocity(const KinematicTree& tree, const VectorXd& q, const VectorXd& qd, int ee);

}  // namespace cascade::dyn
