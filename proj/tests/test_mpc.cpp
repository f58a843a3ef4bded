#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cascade/dynamics/rigid_body.hpp"
#include "cascade/mpc/controller.hpp"
#include "cascade/mpc/keyframe.hpp"
#include "test_util.hpp"

using namespace cascade;
using namespace cascade::mpc;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd stand_q() {
  VectorXd q(7);
  q << 0, 0, 0.2926, 0.8, -1.6, 0.8, -1.6;
  return q;
}

VectorXd stand_x() {
  VectorXd x = VectorXd::Zero(14);
  x.head(7) = stand_q();
  return x;
}

HeuristicParams default_params() {
  HeuristicParams p;
  p.stand_joints = stand_q().tail(4);
  return p;
}

ReferenceTrajectory stand_reference(const dyn::KinematicTree& tree, double t1) {
  UserCommand cmd;
  cmd.vx = 0;
  cmd.height = 0.2926;
  return heuristic_reference(tree, cmd, make_gait("stand", tree), default_params(), 0.0,
                             t1);
}

}  // namespace

TEST_CASE("model schedule step counts") {
  ModelSchedule s{0.25, 0.5, 0.01, 0.05};
  s.validate();
  CHECK(s.wb_steps() == 25);
  CHECK(s.srb_steps() == 10);
  ModelSchedule bad{0.25, 0.5, 0.011, 0.05};
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("contact schedule: periodic queries and transitions") {
  auto tree = testutil::planar_quadruped();
  auto bound = make_gait("bound", tree);
  CHECK(bound.period() == doctest::Approx(0.4));
  CHECK(bound.contacts_at(0.05) == dyn::ContactSet({0, 1}));   // hind stance
  CHECK(bound.contacts_at(0.15) == dyn::ContactSet({0, 0}));   // flight
  CHECK(bound.contacts_at(0.25) == dyn::ContactSet({1, 0}));   // front stance
  CHECK(bound.contacts_at(0.45) == dyn::ContactSet({0, 1}));   // wrapped
  auto tr = bound.transitions_in(0.0, 0.25);
  REQUIRE(tr.size() == 2);
  CHECK(tr[0] == doctest::Approx(0.12));
  CHECK(tr[1] == doctest::Approx(0.20));
  auto touch = bound.touchdowns_at(0.20);
  CHECK(touch == dyn::ContactSet({1, 0}));
}

TEST_CASE("build_problem: T_s = 0 has no SRB phase") {
  auto tree = testutil::planar_quadruped();
  auto ref = stand_reference(tree, 2.0);
  ModelSchedule sched{0.25, 0.0, 0.01, 0.05};
  auto built = build_problem(tree, sched, make_gait("stand", tree), ref, stand_x(), 0.0,
                             CostWeights::defaults(tree));
  CHECK(built.problem.num_phases() == 1);
  CHECK(!built.info.back().is_srb);
  CHECK(built.wb_steps == 25);
}

TEST_CASE("build_problem: bounding window splits into 3 WB phases + SRB") {
  auto tree = testutil::planar_quadruped();
  UserCommand cmd;
  cmd.vx = 0.3;
  cmd.height = 0.2926;
  auto bound = make_gait("bound", tree);
  auto ref = heuristic_reference(tree, cmd, bound, default_params(), 0.0, 2.0);
  ModelSchedule sched{0.25, 0.5, 0.01, 0.05};
  auto built =
      build_problem(tree, sched, bound, ref, stand_x(), 0.0, CostWeights::defaults(tree));
  REQUIRE(built.problem.num_phases() == 4);
  CHECK(built.info[0].contacts == dyn::ContactSet({0, 1}));
  CHECK(built.info[1].contacts == dyn::ContactSet({0, 0}));
  CHECK(built.info[2].contacts == dyn::ContactSet({1, 0}));
  CHECK(built.info[3].is_srb);
  CHECK(built.wb_steps == 25);
  CHECK(built.problem.phases[3].N == 10);
  // touchdown into front stance carries a switching constraint + impact reset
  CHECK(built.problem.phases[1].switch_dim == 1);
  CHECK(built.info[1].impact_at_end);
  CHECK(built.problem.phases[0].switch_dim == 0);  // stance -> flight: takeoff
}

TEST_CASE("build_problem: construction is pure") {
  auto tree = testutil::planar_quadruped();
  auto bound = make_gait("bound", tree);
  UserCommand cmd;
  cmd.vx = 0.3;
  auto ref = heuristic_reference(tree, cmd, bound, default_params(), 0.0, 2.0);
  ModelSchedule sched{0.25, 0.3, 0.01, 0.05};
  auto a = build_problem(tree, sched, bound, ref, stand_x(), 0.03,
                         CostWeights::defaults(tree));
  auto b = build_problem(tree, sched, bound, ref, stand_x(), 0.03,
                         CostWeights::defaults(tree));
  REQUIRE(a.problem.num_phases() == b.problem.num_phases());
  std::mt19937 rng(31);
  for (int i = 0; i < a.problem.num_phases(); ++i) {
    const auto& pa = a.problem.phases[i];
    const auto& pb = b.problem.phases[i];
    CHECK(pa.N == pb.N);
    VectorXd x = testutil::random_vec(rng, pa.state_dim);
    VectorXd u = testutil::random_vec(rng, pa.control_dim);
    CHECK(pa.running_cost(x, u, 0) == pb.running_cost(x, u, 0));
    CHECK((pa.dynamics(x, u, 0) - pb.dynamics(x, u, 0)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("heuristic reference: zero command keeps footholds under hips") {
  auto tree = testutil::planar_quadruped();
  auto ref = stand_reference(tree, 1.0);
  for (double t : {0.0, 0.3, 0.9}) {
    auto s = ref.at(t);
    CHECK(s.q[1] == doctest::Approx(0.0));
    CHECK(s.q[2] == doctest::Approx(0.2926));
    CHECK(s.foot_pos[0][0] == doctest::Approx(0.19));
    CHECK(s.foot_pos[1][0] == doctest::Approx(-0.19));
    // both feet in stance: each carries half the weight
    const double w = tree.total_mass() * 9.81;
    CHECK(s.grf[1] == doctest::Approx(w / 2));
    CHECK(s.grf[3] == doctest::Approx(w / 2));
  }
}

TEST_CASE("swing arc: endpoints and apex") {
  VectorXd p, v;
  Eigen::Vector2d lo(0.0, 0.0), td(0.3, 0.0);
  swing_arc(lo, td, 0.06, 0.2, 0.0, p, v);
  CHECK((p - lo).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(v.cwiseAbs().maxCoeff() < 1e-12);  // zero liftoff velocity
  swing_arc(lo, td, 0.06, 0.2, 1.0, p, v);
  CHECK((p - td).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(v.cwiseAbs().maxCoeff() < 1e-12);
  swing_arc(lo, td, 0.06, 0.2, 0.5, p, v);
  CHECK(p[1] == doctest::Approx(0.06));
  CHECK(p[0] == doctest::Approx(0.15));
}

TEST_CASE("bezier endpoint derivatives follow the control points") {
  std::vector<VectorXd> c = {Eigen::Vector2d(0, 0), Eigen::Vector2d(0.1, 0.2),
                             Eigen::Vector2d(0.5, 0.1), Eigen::Vector2d(0.6, 0.0)};
  CHECK((bezier_point(c, 0.0) - c[0]).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((bezier_point(c, 1.0) - c[3]).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((bezier_velocity(c, 0.0) - 3.0 * (c[1] - c[0])).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((bezier_velocity(c, 1.0) - 3.0 * (c[3] - c[2])).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("compose_references: identity and angle-shifted splice") {
  auto tree = testutil::planar_quadruped();
  auto ref = stand_reference(tree, 1.0);
  auto one = compose_references({ref}, {VectorXd()});
  CHECK(one.samples.size() == ref.samples.size());
  CHECK((one.at(0.5).q - ref.at(0.5).q).cwiseAbs().maxCoeff() == 0.0);

  VectorXd shift = VectorXd::Zero(7);
  shift[0] = 2 * M_PI;
  auto two = compose_references({ref, ref}, {VectorXd(), shift});
  const double t_splice = ref.end_time();
  auto before = two.at(t_splice - 0.01);
  auto after = two.at(t_splice + 0.01);
  CHECK(after.q[0] - before.q[0] == doctest::Approx(2 * M_PI).epsilon(1e-9));
  CHECK(std::fmod(after.q[0], 2 * M_PI) == doctest::Approx(before.q[0]).epsilon(1e-9));
}

TEST_CASE("warm start shift: zero shift reproduces the previous solution") {
  auto tree = testutil::planar_quadruped();
  auto bound = make_gait("bound", tree);
  UserCommand cmd;
  cmd.vx = 0.2;
  auto ref = heuristic_reference(tree, cmd, bound, default_params(), 0.0, 3.0);
  ModelSchedule sched{0.25, 0.3, 0.01, 0.05};
  auto built =
      build_problem(tree, sched, bound, ref, stand_x(), 0.0, CostWeights::defaults(tree));
  auto prev = ocp::make_initial_trajectory(built.problem);
  std::mt19937 rng(5);
  for (auto& ph : prev.phases)
    for (auto& x : ph.x) x = testutil::random_vec(rng, x.size());
  auto shifted = warm_start_shift(built, prev, built);
  for (size_t i = 0; i < prev.phases.size(); ++i)
    for (size_t k = 0; k < prev.phases[i].x.size(); ++k) {
      // boundary nodes resolve to the post-reset value by construction
      if (k == 0 && i > 0) continue;
      CHECK((shifted.phases[i].x[k] - prev.phases[i].x[k]).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("warm start shift: rollover into an impact phase appends roll-out nodes") {
  auto tree = testutil::planar_quadruped();
  auto bound = make_gait("bound", tree);
  UserCommand cmd;
  cmd.vx = 0.2;
  auto ref = heuristic_reference(tree, cmd, bound, default_params(), 0.0, 3.0);
  // previous window [0.13, 0.38]: phases FT | FrS | FT; next window [0.16, 0.41]
  // adds the leading part of the next hind-stance phase, entered via impact
  ModelSchedule sched{0.25, 0.0, 0.01, 0.05};
  auto prev_built = build_problem(tree, sched, bound, ref, stand_x(), 0.13,
                                  CostWeights::defaults(tree));
  auto next_built = build_problem(tree, sched, bound, ref, stand_x(), 0.16,
                                  CostWeights::defaults(tree));
  auto prev = ocp::make_initial_trajectory(prev_built.problem);
  auto shifted = warm_start_shift(prev_built, prev, next_built);
  REQUIRE(next_built.info.back().t_start == doctest::Approx(0.40));
  const auto& last = shifted.phases.back();
  // appended nodes beyond the previous horizon are roll-out states
  int rollout = 0;
  for (size_t k = 0; k < last.shooting.size(); ++k) rollout += last.shooting[k] ? 0 : 1;
  CHECK(rollout == static_cast<int>(last.shooting.size()));
  // and a same-phase extension stays shooting
  auto next_built2 = build_problem(tree, sched, bound, ref, stand_x(), 0.14,
                                   CostWeights::defaults(tree));
  auto shifted2 = warm_start_shift(prev_built, prev, next_built2);
  const auto& last2 = shifted2.phases.back();
  CHECK(last2.shooting[last2.shooting.size() - 1] == 1);
}

TEST_CASE("mpc standing: converged packet carries gravity compensation") {
  auto tree = testutil::planar_quadruped();
  auto ref = stand_reference(tree, 4.0);
  MpcSettings settings = MpcSettings::defaults(tree);
  settings.schedule = ModelSchedule{0.25, 0.3, 0.01, 0.05};
  // statics-dominant task: damp joint velocities and lighten the torque
  // regularizer so the stationary torque pins down the statics manifold
  settings.weights.w_qd.tail(4).setConstant(5.0);
  settings.weights.r_tau = VectorXd::Constant(4, 1e-7);
  settings.build.reb_weight = 1e-6;
  settings.first_solve.cost_tol = 1e-10;
  MpcController mpc(tree, make_gait("stand", tree), ref, settings);

  VectorXd x = stand_x();
  auto packet = mpc.step(x, 0.0);
  REQUIRE(packet.steps.size() == 6);
  CHECK(packet.dt == doctest::Approx(0.01));
  for (int k = 1; k < 6; ++k)
    CHECK(packet.steps[k].time - packet.steps[k - 1].time == doctest::Approx(0.01));

  // feedforward updates are negligible after a converged solve; the packet
  // torque is a gravity-compensating torque: it lies on the statics manifold
  // { tau : N'(B'tau - n(q,0)) = 0 }, N = null(Jc), eliminating the free
  // contact forces. The torque-regularized family direction is nearly
  // cost-flat, so the manifold distance is the well-posed statics check.
  {
    MatrixXd J = dyn::contact_jacobian(tree, stand_q(), dyn::ContactSet::all(2));
    Eigen::JacobiSVD<MatrixXd> svd(J, Eigen::ComputeFullV);
    MatrixXd N = svd.matrixV().rightCols(7 - svd.rank());
    MatrixXd A = N.bottomRows(4).transpose();
    VectorXd b = N.transpose() * dyn::gravity_forces(tree, stand_q());
    const VectorXd tau = packet.steps[0].u;
    VectorXd residual = A * tau - b;
    VectorXd correction = A.transpose() * (A * A.transpose()).ldlt().solve(residual);
    CHECK(correction.cwiseAbs().maxCoeff() < 1e-4);  // distance to the manifold
    // and the robot indeed does not accelerate under the packet torque
    auto dynres = dyn::kkt_contact_dynamics(tree, stand_q(), VectorXd::Zero(7), tau,
                                            dyn::ContactSet::all(2));
    CHECK(dynres.qdd.cwiseAbs().maxCoeff() < 2e-3);
    // the solver stays near the minimum-norm member of the family
    VectorXd tau_min = A.transpose() * (A * A.transpose()).ldlt().solve(b);
    CHECK((tau - tau_min).cwiseAbs().maxCoeff() < 1.0);
  }
  CHECK(packet.steps[0].Qu.cwiseAbs().maxCoeff() < 1e-6);

  // determinism: identical state and time give a bitwise identical packet
  auto packet2 = mpc.step(x, 0.0);
  CHECK((packet2.steps[0].u - packet.steps[0].u).cwiseAbs().maxCoeff() == 0.0);
  CHECK((packet2.steps[5].x - packet.steps[5].x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("keyframe TO: static keyframes return a near-static trajectory") {
  auto tree = testutil::planar_quadruped();
  KeyframeTask task;
  auto both = dyn::ContactSet::all(2);
  task.sequence = {{both, 0.2}, {both, 0.2}};
  Keyframe kf;
  kf.q = stand_q();
  kf.qd = VectorXd::Zero(7);
  task.keyframes = {kf, kf};
  task.x0 = stand_x();
  task.r_tau = VectorXd::Constant(4, 1e-6);  // tracking-dominant weights
  solver::Settings s;
  s.max_inner_iters = 60;
  s.cost_tol = 1e-10;
  auto result = keyframe_to(tree, task, s);
  double pos_dev = 0, vel_dev = 0;
  for (const auto& ph : result.traj.phases)
    for (const auto& x : ph.x) {
      pos_dev = std::max(pos_dev, (x.head(7) - stand_q()).cwiseAbs().maxCoeff());
      vel_dev = std::max(vel_dev, x.tail(7).cwiseAbs().maxCoeff());
    }
  CHECK(pos_dev < 2e-3);
  CHECK(vel_dev < 5e-2);
  CHECK(result.report.final_defect < 1e-7);
}

TEST_CASE("planar leg IK: reproduces the stand pose") {
  auto tree = testutil::planar_quadruped();
  VectorXd q = stand_q();
  auto ee = dyn::forward_kinematics(tree, q);
  for (int leg = 0; leg < 2; ++leg) {
    Eigen::Vector2d angles = planar_leg_ik(tree, leg, q[0], q.segment<2>(1),
                                           Eigen::Vector2d(ee[leg].position));
    CHECK(angles[0] == doctest::Approx(q[3 + 2 * leg]).epsilon(1e-9));
    CHECK(angles[1] == doctest::Approx(q[4 + 2 * leg]).epsilon(1e-9));
  }
}
