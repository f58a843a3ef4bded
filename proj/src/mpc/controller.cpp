#include "cascade/mpc/controller.hpp"

#include "cascade/dynamics/rigid_body.hpp"

namespace cascade::mpc {

using ocp::SolverTrajectory;

MpcSettings MpcSettings::defaults(const dyn::KinematicTree& tree) {
  MpcSettings s;
  s.schedule = ModelSchedule{0.25, 0.3, 0.01, 0.05};
  s.period = 0.03;
  s.weights = CostWeights::defaults(tree);

  s.first_solve.max_inner_iters = 150;
  s.first_solve.max_outer_al_iters = 3;
  s.first_solve.cost_tol = 1e-7;
  s.first_solve.defect_tol = 1e-7;
  s.first_solve.constraint_tol = 1e-4;

  s.step_solve = s.first_solve;
  s.step_solve.max_inner_iters = 4;
  s.step_solve.max_outer_al_iters = 1;
  return s;
}

MpcController::MpcController(const dyn::KinematicTree& tree,
                             const ContactSchedule& contacts,
                             const ReferenceTrajectory& reference,
                             const MpcSettings& settings)
    : tree_(tree), contacts_(contacts), reference_(reference), settings_(settings) {
  settings_.schedule.validate();
  contacts_.validate();
}

void MpcController::reset() {
  solved_once_ = false;
  memory_built_.reset();
  al_memory_.clear();
  last_t_ = std::numeric_limits<double>::quiet_NaN();
}

namespace {

// reference states at the node times, stance-phase gravity compensation as
// the control seed
SolverTrajectory initial_trajectory(const dyn::KinematicTree& tree,
                                    const BuiltProblem& built,
                                    const ReferenceTrajectory& ref, const VectorXd& x0) {
  SolverTrajectory traj;
  traj.phases.resize(built.problem.num_phases());
  for (size_t i = 0; i < built.info.size(); ++i) {
    const ocp::Phase& p = built.problem.phases[i];
    auto& t = traj.phases[i];
    t.x.assign(p.N + 1, VectorXd::Zero(p.state_dim));
    t.u.assign(p.N, VectorXd::Zero(p.control_dim));
    t.defect.assign(p.N + 1, VectorXd::Zero(p.state_dim));
    t.shooting.assign(p.N + 1, 1);

    const PhaseInfo& pi = built.info[i];
    if (pi.is_srb) {
      for (int k = 0; k <= p.N; ++k) {
        ReferenceSample r = ref.at(pi.t_start + k * p.dt);
        VectorXd x(p.state_dim);
        const int bd = tree.base_dof();
        x.head(bd) = r.q.head(bd);
        x.tail(bd) = r.qd.head(bd);
        t.x[k] = x;
        if (k < p.N) t.u[k] = r.grf;
      }
      continue;
    }
    VectorXd tau_seed = VectorXd::Zero(p.control_dim);
    if (pi.contacts.count() > 0) {
      try {
        ReferenceSample r0 = ref.at(pi.t_start);
        tau_seed = dyn::gravity_compensation(tree, r0.q, pi.contacts).tau;
      } catch (const Error&) {
      }
    }
    for (int k = 0; k <= p.N; ++k) {
      ReferenceSample r = ref.at(pi.t_start + k * p.dt);
      VectorXd x(p.state_dim);
      x << r.q, r.qd;
      t.x[k] = x;
      if (k < p.N) t.u[k] = tau_seed;
    }
  }
  traj.phases[0].x[0] = x0;
  traj.phases[0].shooting[0] = 0;
  return traj;
}

long al_key(double t_end, double dt) { return std::lround(t_end / dt); }

}  // namespace

PolicyPacket MpcController::extract_packet(const BuiltProblem& built,
                                           const SolverTrajectory& traj,
                                           const solver::BackwardPassResult& bp,
                                           bool degraded) const {
  PolicyPacket packet;
  packet.dt = built.schedule.dt_w;
  packet.emit_time = built.t0;
  packet.degraded = degraded;
  const int window = std::min(PolicyPacket::kWindow, built.wb_steps);
  for (int g = 0; g < window; ++g) {
    auto [pi, k] = built.wb_step(g);
    const auto& t = traj.phases[pi];
    const auto& q = bp.phases[pi].q[k];
    PacketStep step;
    step.time = built.t0 + g * packet.dt;
    step.x = t.x[k];
    // fold the feedforward update into the nominal: the policy the packet
    // hands over is u + du + K dx, and the expansion re-centers so that its
    // unconstrained minimizer is exactly that policy
    const VectorXd du = bp.phases[pi].kff[k];
    step.u = t.u[k] + du;
    step.Qu = q.Qu + q.Quu * du;
    step.Quu = q.Quu;
    step.Qux = q.Qux;
    step.K = bp.phases[pi].K[k];
    step.contacts = built.info[pi].contacts;
    const int nq = tree_.nq();
    if (step.contacts.count() > 0) {
      try {
        step.contact_forces = dyn::kkt_contact_dynamics(tree_, step.x.head(nq),
                                                        step.x.tail(nq), step.u,
                                                        step.contacts,
                                                        settings_.build.baumgarte)
                                  .contact_forces;
      } catch (const Error&) {
        step.contact_forces =
            VectorXd::Zero(step.contacts.count() * tree_.contact_dim());
      }
    } else {
      step.contact_forces = VectorXd::Zero(0);
    }
    packet.steps.push_back(std::move(step));
  }
  return packet;
}

PolicyPacket MpcController::step(const VectorXd& x_measured, double t_now) {
  if (!last_packet_.empty() && t_now == last_t_ && last_x_.size() == x_measured.size() &&
      (last_x_ - x_measured).cwiseAbs().maxCoeff() == 0.0)
    return last_packet_;

  if (provider_) reference_ = provider_(x_measured, t_now);
  BuiltProblem built = build_problem(tree_, settings_.schedule, contacts_, reference_,
                                     x_measured, t_now, settings_.weights,
                                     settings_.build);

  // warm-start the switching-constraint multipliers by phase end time
  for (size_t i = 0; i < built.info.size(); ++i) {
    if (built.problem.phases[i].switch_dim == 0) continue;
    auto it = al_memory_.find(al_key(built.info[i].t_end, built.schedule.dt_w));
    if (it != al_memory_.end() &&
        it->second.size() == built.problem.phases[i].switch_dim)
      built.problem.al_multipliers[i] = it->second;
  }

  SolverTrajectory init;
  if (solved_once_ && memory_built_) {
    init = warm_start_shift(*memory_built_, memory_traj_, built, &reference_);
  } else {
    init = initial_trajectory(tree_, built, reference_, x_measured);
  }

  solver::Settings s = solved_once_ ? settings_.step_solve : settings_.first_solve;
  if (!settings_.use_wall_clock) s.max_wall_time = 0.0;

  auto result = solver::solve(built.problem, init, s);
  last_report_ = result.report;

  for (size_t i = 0; i < built.info.size(); ++i) {
    if (built.problem.phases[i].switch_dim == 0) continue;
    al_memory_[al_key(built.info[i].t_end, built.schedule.dt_w)] =
        built.problem.al_multipliers[i];
  }

  const bool degraded = result.report.status == solver::SolveStatus::NoProgress;
  PolicyPacket packet = extract_packet(built, result.traj, result.bp, degraded);

  memory_built_ = std::move(built);
  memory_traj_ = std::move(result.traj);
  solved_once_ = true;
  last_x_ = x_measured;
  last_t_ = t_now;
  last_packet_ = packet;
  return packet;
}

}  // namespace cascade::mpc
