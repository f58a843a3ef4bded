#include "cascade/mpc/keyframe.hpp"

#include <cmath>
#include <memory>

#include "cascade/dynamics/euler.hpp"
#include "cascade/dynamics/kinematics.hpp"
#include "cascade/dynamics/rigid_body.hpp"
#include "kkt_cache.hpp"

namespace cascade::mpc {

using dyn::ContactSet;
using dyn::KinematicTree;
using ocp::Phase;

namespace {

VectorXd nan_state(int n) {
  return VectorXd::Constant(n, std::numeric_limits<double>::quiet_NaN());
}

struct KfContext {
  KinematicTree tree;
  KeyframeTask task;
  mutable mpc::internal::KktCache kkt;
};

}  // namespace

Eigen::Vector2d planar_leg_ik(const KinematicTree& tree, int leg, double base_pitch,
                              const Eigen::Vector2d& base_pos,
                              const Eigen::Vector2d& foot_target) {
  // chain: hip joint -> thigh -> knee joint -> shank -> foot offset
  int shank = tree.end_effectors[leg].link;
  int thigh = tree.joints[shank].parent;
  const double l1 = tree.joints[shank].placement_pos.norm();
  const double l2 = tree.end_effectors[leg].offset.norm();
  const Eigen::Matrix2d R = dyn::rot_planar(base_pitch);
  const Eigen::Vector2d hip_world =
      base_pos + R * tree.joints[thigh].placement_pos.head<2>();
  const Eigen::Vector2d r = R.transpose() * (foot_target - hip_world);

  const double d2 = r.squaredNorm();
  double D = (d2 - l1 * l1 - l2 * l2) / (2 * l1 * l2);
  if (D > 1.0 - 1e-9) D = 1.0 - 1e-9;  // fully stretched: clamp just inside
  if (D < -1.0) throw Error("planar_leg_ik: target too close to the hip");
  const double knee = -std::acos(D);  // knee folds backwards
  // standard two-link solution in the rotated frame (X, Y) = (-z, x)
  const double X = -r.y(), Y = r.x();
  const double hip =
      std::atan2(Y, X) - std::atan2(l2 * std::sin(knee), l1 + l2 * std::cos(knee));
  return {hip, knee};
}

KeyframeResult keyframe_to(const KinematicTree& tree, const KeyframeTask& task,
                           const solver::Settings& settings) {
  if (task.sequence.size() != task.keyframes.size())
    throw Error("keyframe_to: one keyframe per phase required");
  const int nq = tree.nq();
  const int na = tree.num_joints();
  const int nx = 2 * nq;

  auto ctx = std::make_shared<KfContext>();
  ctx->tree = tree;
  ctx->task = task;
  if (ctx->task.w_q.size() == 0) ctx->task.w_q = VectorXd::Constant(nq, 20.0);
  if (ctx->task.w_qd.size() == 0) ctx->task.w_qd = VectorXd::Constant(nq, 2.0);
  if (ctx->task.r_tau.size() == 0) ctx->task.r_tau = VectorXd::Constant(na, 1e-4);

  ocp::MultiPhaseProblem mp;
  const int n_phases = static_cast<int>(task.sequence.size());
  std::vector<double> end_times;
  double t_acc = 0;

  for (int i = 0; i < n_phases; ++i) {
    const ContactSet mode = task.sequence[i].first;
    const double duration = task.sequence[i].second;
    const int steps = std::max(1, static_cast<int>(std::lround(duration / task.dt)));
    t_acc += steps * task.dt;
    end_times.push_back(t_acc);

    Phase p;
    p.name = "kf" + std::to_string(i);
    p.N = steps;
    p.dt = task.dt;
    p.state_dim = nx;
    p.control_dim = na;

    const double alpha = task.baumgarte;
    const double dt = task.dt;
    p.dynamics = [ctx, mode, dt, alpha, nq, nx](const VectorXd& x, const VectorXd& u,
                                                int) {
      try {
        auto d = ctx->kkt.eval(ctx->tree, x.head(nq), x.tail(nq), u, mode, alpha);
        VectorXd next(nx);
        next.head(nq) = x.head(nq) + dt * x.tail(nq);
        next.tail(nq) = x.tail(nq) + dt * d.qdd;
        return next;
      } catch (const Error&) {
        return nan_state(nx);
      }
    };

    const Keyframe kf = task.keyframes[i];
    p.running_cost = [ctx, kf, dt, nq](const VectorXd& x, const VectorXd& u, int) {
      const VectorXd dq = x.head(nq) - kf.q;
      const VectorXd dqd = x.tail(nq) - kf.qd;
      return dt * (dq.dot(ctx->task.w_q.asDiagonal() * dq) +
                   dqd.dot(ctx->task.w_qd.asDiagonal() * dqd) +
                   u.dot(ctx->task.r_tau.asDiagonal() * u));
    };
    p.running_cost_expansion = [ctx, kf, dt, nq, na](const VectorXd& x, const VectorXd& u,
                                                     int, VectorXd& lx, VectorXd& lu,
                                                     MatrixXd& lxx, MatrixXd& luu,
                                                     MatrixXd& lux) {
      lx = VectorXd::Zero(2 * nq);
      lx.head(nq) = dt * 2.0 * (ctx->task.w_q.asDiagonal() * (x.head(nq) - kf.q));
      lx.tail(nq) = dt * 2.0 * (ctx->task.w_qd.asDiagonal() * (x.tail(nq) - kf.qd));
      lxx = MatrixXd::Zero(2 * nq, 2 * nq);
      lxx.topLeftCorner(nq, nq) = dt * 2.0 * ctx->task.w_q.asDiagonal().toDenseMatrix();
      lxx.bottomRightCorner(nq, nq) =
          dt * 2.0 * ctx->task.w_qd.asDiagonal().toDenseMatrix();
      lu = dt * 2.0 * (ctx->task.r_tau.asDiagonal() * u);
      luu = dt * 2.0 * ctx->task.r_tau.asDiagonal().toDenseMatrix();
      lux = MatrixXd::Zero(na, 2 * nq);
    };
    const double tscale = task.terminal_scale * task.dt;
    p.terminal_cost = [ctx, kf, tscale, nq](const VectorXd& x) {
      const VectorXd dq = x.head(nq) - kf.q;
      const VectorXd dqd = x.tail(nq) - kf.qd;
      return tscale * (dq.dot(ctx->task.w_q.asDiagonal() * dq) +
                       dqd.dot(ctx->task.w_qd.asDiagonal() * dqd));
    };
    p.terminal_cost_expansion = [ctx, kf, tscale, nq](const VectorXd& x, VectorXd& g,
                                                      MatrixXd& H) {
      g = VectorXd::Zero(2 * nq);
      g.head(nq) = tscale * 2.0 * (ctx->task.w_q.asDiagonal() * (x.head(nq) - kf.q));
      g.tail(nq) = tscale * 2.0 * (ctx->task.w_qd.asDiagonal() * (x.tail(nq) - kf.qd));
      H = MatrixXd::Zero(2 * nq, 2 * nq);
      H.topLeftCorner(nq, nq) = tscale * 2.0 * ctx->task.w_q.asDiagonal().toDenseMatrix();
      H.bottomRightCorner(nq, nq) =
          tscale * 2.0 * ctx->task.w_qd.asDiagonal().toDenseMatrix();
    };

    // torque, joint, speed boxes; friction for stance feet; optional
    // minimum-body-height row in the designated phase
    const bool min_h = (task.min_body_height >= 0 && task.min_height_phase == i);
    const int pyr = 2 * mode.count() * (tree.contact_dim() - 1);
    p.ineq_dim = 6 * na + pyr + (min_h ? 1 : 0);
    const double min_height = task.min_body_height;
    p.path_ineq = [ctx, mode, nq, na, alpha, min_h, min_height](const VectorXd& x,
                                                                const VectorXd& u, int) {
      const KinematicTree& tr = ctx->tree;
      const int pyr2 = 2 * mode.count() * (tr.contact_dim() - 1);
      VectorXd h(6 * na + pyr2 + (min_h ? 1 : 0));
      const VectorXd qj = x.segment(tr.base_dof(), na);
      const VectorXd qdj = x.segment(nq + tr.base_dof(), na);
      h.segment(0, na) = u - tr.tau_lower;
      h.segment(na, na) = tr.tau_upper - u;
      h.segment(2 * na, na) = qj - tr.qj_lower;
      h.segment(3 * na, na) = tr.qj_upper - qj;
      h.segment(4 * na, na) = qdj - tr.qdj_lower;
      h.segment(5 * na, na) = tr.qdj_upper - qdj;
      if (pyr2 > 0) {
        try {
          auto d = ctx->kkt.eval(tr, x.head(nq), x.tail(nq), u, mode, alpha);
          const int cd = tr.contact_dim();
          int row = 6 * na;
          for (int c = 0; c < mode.count(); ++c) {
            const double fz = d.contact_forces[c * cd + cd - 1];
            for (int axis = 0; axis < cd - 1; ++axis) {
              const double ft = d.contact_forces[c * cd + axis];
              h[row++] = tr.friction_mu * fz - ft;
              h[row++] = tr.friction_mu * fz + ft;
            }
          }
        } catch (const Error&) {
          h.segment(6 * na, pyr2)
              .setConstant(std::numeric_limits<double>::quiet_NaN());
        }
      }
      if (min_h) h[h.size() - 1] = x[2] - min_height;
      return h;
    };

    if (i + 1 < n_phases) {
      const ContactSet next_mode = task.sequence[i + 1].first;
      ContactSet touchdown = ContactSet::none(tree.num_ees());
      for (int j = 0; j < tree.num_ees(); ++j)
        touchdown.active[j] = next_mode.active[j] && !mode.active[j];
      if (touchdown.count() > 0) {
        p.switch_dim = touchdown.count();
        const double hc = task.ground_height;
        p.switching_constraint = [ctx, touchdown, nq, hc](const VectorXd& x) {
          auto ee = dyn::forward_kinematics(ctx->tree, x.head(nq));
          VectorXd g(touchdown.count());
          int r = 0;
          for (int j = 0; j < ctx->tree.num_ees(); ++j)
            if (touchdown.active[j])
              g[r++] = ee[j].position[ctx->tree.linear_dim() - 1] - hc;
          return g;
        };
        p.reset = [ctx, next_mode, nq, nx](const VectorXd& x) {
          try {
            auto imp = dyn::impact_map(ctx->tree, x.head(nq), x.tail(nq), next_mode);
            VectorXd out(nx);
            out.head(nq) = x.head(nq);
            out.tail(nq) = imp.qd_plus;
            return out;
          } catch (const Error&) {
            return nan_state(nx);
          }
        };
      }
    }
    mp.phases.push_back(std::move(p));
  }

  mp.x0 = task.x0;
  mp.al_penalty = 50.0;
  mp.reb_delta = 0.1;
  mp.reb_weight = 2e-3;
  mp.validate();

  // initial guess: straight-line states between keyframes, gravity
  // compensation in stance
  ocp::SolverTrajectory init = ocp::make_initial_trajectory(mp);
  VectorXd from = task.x0;
  for (int i = 0; i < n_phases; ++i) {
    VectorXd to(nx);
    to << task.keyframes[i].q, task.keyframes[i].qd;
    const int N = mp.phases[i].N;
    for (int k = 0; k <= N; ++k)
      init.phases[i].x[k] = from + (to - from) * (double(k) / N);
    VectorXd tau_seed = VectorXd::Zero(na);
    if (task.sequence[i].first.count() > 0) {
      try {
        tau_seed = dyn::gravity_compensation(tree, task.keyframes[i].q,
                                             task.sequence[i].first)
                       .tau;
      } catch (const Error&) {
      }
    }
    for (int k = 0; k < N; ++k) init.phases[i].u[k] = tau_seed;
    from = to;
  }

  KeyframeResult out;
  auto result = solver::solve(mp, init, settings);
  out.report = result.report;
  out.traj = std::move(result.traj);
  out.phase_end_times = end_times;

  std::vector<ContactSet> modes;
  for (const auto& [m, d] : task.sequence) modes.push_back(m);
  out.reference =
      trajectory_to_reference(tree, mp, out.traj, modes, 0.0, task.dt, 1.5, task.baumgarte);
  out.problem = std::move(mp);
  return out;
}

ReferenceTrajectory trajectory_to_reference(const KinematicTree& tree,
                                            const ocp::MultiPhaseProblem& problem,
                                            const ocp::SolverTrajectory& traj,
                                            const std::vector<ContactSet>& modes,
                                            double t0, double dt, double pad,
                                            double baumgarte) {
  const int nq = tree.nq();
  const int n_ee = tree.num_ees();
  const int cd = tree.contact_dim();
  ReferenceTrajectory ref;
  ref.t0 = t0;
  ref.dt = dt;

  auto push_sample = [&](const VectorXd& x, const VectorXd* u, const ContactSet& mode) {
    ReferenceSample s;
    s.q = x.head(nq);
    s.qd = x.tail(nq);
    s.foot_pos.resize(n_ee);
    s.foot_vel.resize(n_ee);
    auto ee = dyn::forward_kinematics(tree, s.q);
    for (int j = 0; j < n_ee; ++j) {
      s.foot_pos[j] = ee[j].position;
      s.foot_vel[j] = dyn::ee_velocity(tree, s.q, s.qd, j);
    }
    s.grf = VectorXd::Zero(n_ee * cd);
    if (u && mode.count() > 0) {
      try {
        auto d = dyn::kkt_contact_dynamics(tree, s.q, s.qd, *u, mode, baumgarte);
        int c = 0;
        for (int j = 0; j < n_ee; ++j)
          if (mode.active[j]) s.grf.segment(j * cd, cd) = d.contact_forces.segment(c++ * cd, cd);
      } catch (const Error&) {
      }
    }
    ref.append(s);
  };

  for (int i = 0; i < problem.num_phases(); ++i) {
    const auto& t = traj.phases[i];
    const int N = problem.phases[i].N;
    const int last = (i == problem.num_phases() - 1) ? N : N - 1;
    for (int k = 0; k <= last; ++k)
      push_sample(t.x[k], k < N ? &t.u[k] : nullptr, modes[i]);
  }
  // hold the final sample as padding
  const int extra = static_cast<int>(std::lround(pad / dt));
  ReferenceSample hold = ref.samples.back();
  hold.qd.setZero();
  for (auto& v : hold.foot_vel) v.setZero();
  for (int k = 0; k < extra; ++k) ref.append(hold);
  return ref;
}

KeyframeTask planar_flip_task(const KinematicTree& tree, const FlipParams& fp,
                              const VectorXd& stand_joints) {
  const int nq = tree.nq();
  auto both = ContactSet::all(2);
  auto none = ContactSet::none(2);
  auto hind = ContactSet({0, 1});

  KeyframeTask task;
  task.dt = 0.01;
  const double t_tuck = fp.tuck_fraction * fp.t_flight;
  const double t_prepare = fp.t_flight - t_tuck;
  task.sequence = {{both, fp.t_stance}, {hind, fp.t_launch}, {none, t_tuck},
                   {none, t_prepare},   {both, fp.t_land},   {none, fp.t_hop},
                   {both, fp.t_recover}};
  task.min_body_height = fp.min_landing_height;
  task.min_height_phase = 4;

  // essential coordinates (pitch, height) are tracked hard, the rest loosely
  task.w_q = VectorXd::Zero(nq);
  task.w_q << 30, 2, 30, 1.5, 1.5, 1.5, 1.5;
  task.w_qd = VectorXd::Zero(nq);
  task.w_qd << 2.0, 0.5, 2.0, 0.05, 0.05, 0.05, 0.05;
  task.r_tau = VectorXd::Constant(tree.num_joints(), 1e-4);

  // rear-up launch: modest liftoff pitch, the rest of the rotation completes
  // in flight at a constant rate
  const double g = 9.81;
  const double pitch_liftoff = fp.liftoff_pitch;
  const double rate = (2 * M_PI - pitch_liftoff) / fp.t_flight;
  const double vz_takeoff = 0.5 * g * fp.t_flight;

  const double hind_foot_x = -0.19;  // foothold held through crouch and launch
  auto make_q = [&](double pitch, double x, double z, const VectorXd& joints) {
    VectorXd q = VectorXd::Zero(nq);
    q[0] = pitch;
    q[1] = x;
    q[2] = z;
    q.tail(tree.num_joints()) = joints;
    return q;
  };
  auto ik_or = [&](int leg, double pitch, const Eigen::Vector2d& base,
                   const Eigen::Vector2d& target, const Eigen::Vector2d& fallback) {
    try {
      return Eigen::Vector2d(planar_leg_ik(tree, leg, pitch, base, target));
    } catch (const Error&) {
      return fallback;
    }
  };

  VectorXd tuck(4);
  tuck << 1.2, -2.4, 1.2, -2.4;  // folded legs for the aerial phase
  const Eigen::Vector2d stand_leg(stand_joints[0], stand_joints[1]);

  Keyframe kf;
  kf.qd = VectorXd::Zero(nq);

  // 1: end of the two-leg push: rising and starting to rotate
  {
    VectorXd joints(4);
    const double z1 = fp.stand_height - 0.02;
    Eigen::Vector2d base(0.0, z1);
    joints.head<2>() = ik_or(0, 0.15, base, Eigen::Vector2d(0.19, 0.0), stand_leg);
    joints.tail<2>() = ik_or(1, 0.15, base, Eigen::Vector2d(-0.19, 0.0), stand_leg);
    kf.q = make_q(0.15, 0.0, z1, joints);
    kf.qd = VectorXd::Zero(nq);
    kf.qd[0] = 2.0;
    kf.qd[2] = 1.1;
    task.keyframes.push_back(kf);
  }

  // 2: liftoff: reared up over the hind foothold, front legs tucked,
  // rotating and rising
  {
    const double x_lo = hind_foot_x + 0.10;  // CoM roughly above the foothold
    const double z_lo = fp.stand_height + 0.04;
    VectorXd joints(4);
    joints.head<2>() = tuck.head<2>();
    joints.tail<2>() = ik_or(1, pitch_liftoff, Eigen::Vector2d(x_lo, z_lo),
                             Eigen::Vector2d(hind_foot_x, 0.0), stand_leg);
    kf.q = make_q(pitch_liftoff, x_lo, z_lo, joints);
    kf.qd = VectorXd::Zero(nq);
    kf.qd[0] = rate;
    kf.qd[2] = vz_takeoff;
    task.keyframes.push_back(kf);
  }

  // 3: tucked mid-flight, rotation mostly done
  {
    const double pitch_mid = pitch_liftoff + rate * t_tuck;
    kf.q = make_q(pitch_mid, -0.05, fp.stand_height + 0.06, tuck);
    kf.qd = VectorXd::Zero(nq);
    kf.qd[0] = rate;
    kf.qd[2] = vz_takeoff - g * t_tuck;
    task.keyframes.push_back(kf);
  }

  // 4: touchdown: rotation complete, legs extended toward a landing pose
  {
    VectorXd landing(4);
    landing << 0.9, -1.8, 0.9, -1.8;
    kf.q = make_q(2 * M_PI, 0.0, fp.stand_height, landing);
    kf.qd = VectorXd::Zero(nq);
    kf.qd[0] = rate * 0.3;  // rotation spent, legs reaching down
    kf.qd[2] = -vz_takeoff;
    task.keyframes.push_back(kf);
  }

  // 5: landing stance absorbed into a crouch
  kf.q = make_q(2 * M_PI, 0.0, fp.crouch_height, task.keyframes[0].q.tail(4));
  kf.qd = VectorXd::Zero(nq);
  task.keyframes.push_back(kf);

  // 6: recovery hop
  kf.q = make_q(2 * M_PI, 0.0, fp.stand_height + 0.02,
                (0.3 * tuck + 0.7 * stand_joints).eval());
  kf.qd = VectorXd::Zero(nq);
  task.keyframes.push_back(kf);

  // 7: back to the stand
  kf.q = make_q(2 * M_PI, 0.0, fp.stand_height, stand_joints);
  kf.qd = VectorXd::Zero(nq);
  task.keyframes.push_back(kf);

  VectorXd x0 = VectorXd::Zero(2 * nq);
  x0.head(nq) = make_q(0.0, 0.0, fp.stand_height, stand_joints);
  task.x0 = x0;
  return task;
}

}  // namespace cascade::mpc
