#pragma once

#include <vector>

#include "cascade/dynamics/tree.hpp"
#include "cascade/mpc/schedule.hpp"

namespace cascade::mpc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// One time slice of the tracking targets.
struct ReferenceSample {
  VectorXd q, qd;                  // whole-body reference
  std::vector<VectorXd> foot_pos;  // per end effector, world frame
  std::vector<VectorXd> foot_vel;
  VectorXd grf;                    // stacked per-leg ground-force reference
};

/// Dense, uniformly sampled reference with linear interpolation. Covers at
/// least one full prediction window beyond the episode end by construction.
struct ReferenceTrajectory {
  double t0 = 0.0;
  double dt = 0.01;
  std::vector<ReferenceSample> samples;

  double end_time() const { return t0 + dt * (static_cast<double>(samples.size()) - 1); }
  ReferenceSample at(double t) const;
  void append(const ReferenceSample& s) { samples.push_back(s); }
};

struct UserCommand {
  double vx = 0.0;       // forward velocity [m/s]
  double height = 0.29;  // body height [m]
  // planar model: no vy / yaw rate
};

struct HeuristicParams {
  double foothold_clamp = 0.15;  // box half-width around the hip projection
  double swing_apex = 0.06;      // swing apex height above ground
  double ground_height = 0.0;
  double vx_start = 0.0;         // commanded velocity engages at this time
  double x_offset = 0.0;         // base x at vx_start (anchors the reference)
  // measured forward velocity; when finite, footholds use it plus the
  // capture correction toward the commanded speed
  double vx_measured = std::numeric_limits<double>::quiet_NaN();
  double capture_gain = 0.06;    // [s]
  VectorXd stand_joints;         // nominal joint posture
};

/// Kinematic gait reference: base states from integrating the command,
/// footholds from the stance-time heuristic (clamped around the hip), swing
/// feet on two-segment cubic Bezier arcs, normal GRF = weight divided by the
/// number of active contacts.
ReferenceTrajectory heuristic_reference(const dyn::KinematicTree& tree,
                                        const UserCommand& command,
                                        const ContactSchedule& contacts,
                                        const HeuristicParams& params, double t_begin,
                                        double t_end, double dt = 0.01);

/// Concatenates reference segments in order. shifts[i] is added to segment
/// i's q samples (angle unwrapping, e.g. +2pi on the rotation coordinate);
/// shifts[0] applies to the first segment. Value discontinuities at splices
/// are permitted.
ReferenceTrajectory compose_references(const std::vector<ReferenceTrajectory>& segments,
                                       const std::vector<VectorXd>& shifts);

/// Cubic Bezier through 4 control points, s in [0,1]; also returns d/ds.
VectorXd bezier_point(const std::vector<VectorXd>& ctrl, double s);
VectorXd bezier_velocity(const std::vector<VectorXd>& ctrl, double s);

/// Two-segment cubic swing arc from liftoff to touchdown with given apex
/// height; returns position and velocity at phase s in [0, 1] over duration T.
void swing_arc(const VectorXd& liftoff, const VectorXd& touchdown, double apex_height,
               double duration, double s, VectorXd& pos, VectorXd& vel);

}  // namespace cascade::mpc
