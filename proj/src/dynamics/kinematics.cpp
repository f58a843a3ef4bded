#include "cascade/dynamics/kinematics.hpp"

#include "cascade/dynamics/euler.hpp"

namespace cascade::dyn {

void KinematicTree::finalize() {
  if (links.size() != joints.size())
    throw ModelError("model '" + name + "': links and joints must pair up");
  if (links.empty()) throw ModelError("model '" + name + "': no links");
  if (joints[0].parent != -1)
    throw ModelError("model '" + name + "': root joint must have parent -1");
  if (joints[0].type == JointType::Revolute)
    throw ModelError("model '" + name + "': root joint must be a floating base");
  planar_ = joints[0].type == JointType::FloatingBasePlanar;

  dof_offset_.resize(joints.size());
  nq_ = 0;
  for (size_t i = 0; i < joints.size(); ++i) {
    const Joint& j = joints[i];
    if (i > 0) {
      if (j.type != JointType::Revolute)
        throw ModelError("model '" + name + "': exactly one floating base, at the root");
      if (j.parent < 0 || j.parent >= static_cast<int>(i))
        throw ModelError("model '" + name + "': joint " + std::to_string(i) +
                         " parent must precede it");
    }
    dof_offset_[i] = nq_;
    nq_ += joint_dof_count(static_cast<int>(i));
  }

  const int ld = linear_dim();
  for (size_t i = 0; i < links.size(); ++i) {
    const Link& l = links[i];
    if (l.mass <= 0)
      throw ModelError("model '" + name + "': link '" + l.name + "' mass must be > 0");
    if (l.com.size() != ld)
      throw ModelError("model '" + name + "': link '" + l.name + "' com dimension");
    if (planar_) {
      if (l.inertia.size() != 1 || l.inertia(0, 0) <= 0)
        throw ModelError("model '" + name + "': link '" + l.name +
                         "' inertia must be a positive scalar");
    } else {
      if (l.inertia.rows() != 3 || l.inertia.cols() != 3)
        throw ModelError("model '" + name + "': link '" + l.name + "' inertia must be 3x3");
      if ((l.inertia - l.inertia.transpose()).norm() > 1e-9)
        throw ModelError("model '" + name + "': link '" + l.name + "' inertia not symmetric");
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(l.inertia);
      if (es.eigenvalues().minCoeff() <= 0)
        throw ModelError("model '" + name + "': link '" + l.name +
                         "' inertia not positive definite");
    }
  }
  for (const auto& ee : end_effectors) {
    if (ee.link < 0 || ee.link >= num_links())
      throw ModelError("model '" + name + "': end effector '" + ee.name + "' bad link index");
    if (ee.offset.size() != ld)
      throw ModelError("model '" + name + "': end effector '" + ee.name + "' offset dimension");
  }

  const int nj = num_joints();
  auto check_limits = [&](const VectorXd& lo, const VectorXd& hi, const std::string& what) {
    if (lo.size() != nj || hi.size() != nj)
      throw ModelError("model '" + name + "': " + what + " limits must have one entry per joint");
    for (int k = 0; k < nj; ++k)
      if (!(lo[k] < hi[k]))
        throw ModelError("model '" + name + "': " + what + " limit " + std::to_string(k) +
                         " must satisfy lower < upper");
  };
  check_limits(tau_lower, tau_upper, "torque");
  check_limits(qj_lower, qj_upper, "joint angle");
  check_limits(qdj_lower, qdj_upper, "joint speed");
  if (friction_mu <= 0)
    throw ModelError("model '" + name + "': friction coefficient must be > 0");
  if (gravity.size() != ld)
    throw ModelError("model '" + name + "': gravity dimension");
}

FrameSet compute_frames(const KinematicTree& tree, const VectorXd& q) {
  tree.check_coordinates(q);
  const int nl = tree.num_links();
  FrameSet fs;
  fs.rot.resize(nl);
  fs.pos.resize(nl);
  fs.joint_pos.resize(nl);
  fs.joint_axis_world.resize(nl);

  for (int i = 0; i < nl; ++i) {
    const Joint& joint = tree.joints[i];
    MatrixXd parent_rot;
    VectorXd parent_pos;
    if (joint.parent < 0) {
      parent_rot = MatrixXd::Identity(tree.linear_dim(), tree.linear_dim());
      parent_pos = VectorXd::Zero(tree.linear_dim());
    } else {
      parent_rot = fs.rot[joint.parent];
      parent_pos = fs.pos[joint.parent];
    }
    const MatrixXd joint_rot = parent_rot * joint.placement_rot;
    const VectorXd joint_pos = parent_pos + parent_rot * joint.placement_pos;
    fs.joint_pos[i] = joint_pos;

    const int off = tree.joint_dof_offset(i);
    switch (joint.type) {
      case JointType::FloatingBasePlanar: {
        fs.rot[i] = joint_rot * rot_planar(q[off]);
        fs.pos[i] = joint_pos + joint_rot * q.segment<2>(off + 1);
        break;
      }
      case JointType::FloatingBaseEuler: {
        fs.rot[i] = joint_rot * rot_zyx(q.segment<3>(off));
        fs.pos[i] = joint_pos + joint_rot * q.segment<3>(off + 3);
        break;
      }
      case JointType::Revolute: {
        if (tree.planar()) {
          fs.rot[i] = joint_rot * rot_planar(q[off]);
        } else {
          Eigen::Vector3d axis = joint.axis.normalized();
          fs.rot[i] = joint_rot * Eigen::AngleAxisd(q[off], axis).toRotationMatrix();
          fs.joint_axis_world[i] = joint_rot * axis;
        }
        fs.pos[i] = joint_pos;
        break;
      }
    }
  }
  return fs;
}

VectorXd link_com_world(const KinematicTree& tree, const FrameSet& frames, int link) {
  return frames.pos[link] + frames.rot[link] * tree.links[link].com;
}

VectorXd ee_position(const KinematicTree& tree, const FrameSet& frames, int ee) {
  const EndEffector& e = tree.end_effectors[ee];
  return frames.pos[e.link] + frames.rot[e.link] * e.offset;
}

std::vector<EEPose> forward_kinematics(const KinematicTree& tree, const VectorXd& q) {
  FrameSet frames = compute_frames(tree, q);
  std::vector<EEPose> out;
  out.reserve(tree.num_ees());
  for (int e = 0; e < tree.num_ees(); ++e) {
    EEPose pose;
    pose.position = ee_position(tree, frames, e);
    pose.orientation = frames.rot[tree.end_effectors[e].link];
    out.push_back(std::move(pose));
  }
  return out;
}

namespace {

// Velocity contribution of every joint on the path from `link` to the root.
// The Euler floating base needs q for its rate mapping, so the chain walk
// takes the coordinates along.
template <typename Fill>
void walk_chain(const KinematicTree& tree, const FrameSet& frames, const VectorXd& q,
                int link, const VectorXd& point, Fill&& fill) {
  const bool planar = tree.planar();
  int l = link;
  while (l >= 0) {
    const Joint& joint = tree.joints[l];
    const int off = tree.joint_dof_offset(l);
    switch (joint.type) {
      case JointType::FloatingBasePlanar: {
        Eigen::Vector2d r = point.head<2>() - frames.pos[l].head<2>();
        fill(off, VectorXd(perp(r)), VectorXd::Constant(1, 1.0));
        fill(off + 1, VectorXd(Eigen::Vector2d(1, 0)), VectorXd::Zero(1));
        fill(off + 2, VectorXd(Eigen::Vector2d(0, 1)), VectorXd::Zero(1));
        break;
      }
      case JointType::FloatingBaseEuler: {
        // omega_world = R E(theta) thetadot; point velocity adds
        // omega x (p - c) plus cdot.
        const Eigen::Vector3d theta = q.segment<3>(off);
        const Eigen::Matrix3d RE = frames.rot[l] * euler_rate_to_omega(theta);
        const Eigen::Vector3d r = Eigen::Vector3d(point) - Eigen::Vector3d(frames.pos[l]);
        const Eigen::Matrix3d lin = -skew(r) * RE;
        for (int k = 0; k < 3; ++k)
          fill(off + k, VectorXd(lin.col(k)), VectorXd(RE.col(k)));
        for (int k = 0; k < 3; ++k)
          fill(off + 3 + k, VectorXd(Eigen::Matrix3d::Identity().col(k)), VectorXd::Zero(3));
        break;
      }
      case JointType::Revolute: {
        if (planar) {
          Eigen::Vector2d r = point.head<2>() - frames.joint_pos[l].head<2>();
          fill(off, VectorXd(perp(r)), VectorXd::Constant(1, 1.0));
        } else {
          const Eigen::Vector3d a = frames.joint_axis_world[l];
          const Eigen::Vector3d r = Eigen::Vector3d(point) - Eigen::Vector3d(frames.joint_pos[l]);
          fill(off, VectorXd(a.cross(r)), VectorXd(a));
        }
        break;
      }
    }
    l = joint.parent;
  }
}

}  // namespace

MatrixXd point_jacobian(const KinematicTree& tree, const VectorXd& q, const FrameSet& frames,
                        int link, const VectorXd& world_point) {
  MatrixXd J = MatrixXd::Zero(tree.linear_dim(), tree.nv());
  walk_chain(tree, frames, q, link, world_point,
             [&](int dof, const VectorXd& lin, const VectorXd&) { J.col(dof) = lin; });
  return J;
}

MatrixXd angular_jacobian(const KinematicTree& tree, const VectorXd& q, const FrameSet& frames,
                          int link) {
  MatrixXd J = MatrixXd::Zero(tree.angular_dim(), tree.nv());
  VectorXd dummy = VectorXd::Zero(tree.linear_dim());
  walk_chain(tree, frames, q, link, dummy,
             [&](int dof, const VectorXd&, const VectorXd& ang) { J.col(dof) = ang; });
  return J;
}

VectorXd ee_velocity(const KinematicTree& tree, const VectorXd& q, const VectorXd& qd, int ee) {
  FrameSet frames = compute_frames(tree, q);
  VectorXd p = ee_position(tree, frames, ee);
  MatrixXd J = point_jacobian(tree, q, frames, tree.end_effectors[ee].link, p);
  return J * qd;
}

}  // namespace cascade::dyn
