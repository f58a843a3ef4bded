#include "cascade/mpc/controller.hpp"

namespace cascade::mpc {

using ocp::SolverTrajectory;

namespace {

// dense per-grid-step view of the whole-body part of a solution
struct FlatWb {
  std::vector<VectorXd> pre;    // state approaching grid node from the left
  std::vector<VectorXd> post;   // state leaving grid node to the right
  std::vector<VectorXd> u;      // control on interval [g, g+1)
};

FlatWb flatten_wb(const BuiltProblem& built, const SolverTrajectory& traj) {
  FlatWb flat;
  flat.pre.assign(built.wb_steps + 1, VectorXd());
  flat.post.assign(built.wb_steps + 1, VectorXd());
  flat.u.assign(built.wb_steps, VectorXd());
  int g = 0;
  for (size_t i = 0; i < built.info.size(); ++i) {
    if (built.info[i].is_srb) break;
    const auto& t = traj.phases[i];
    const int N = built.problem.phases[i].N;
    for (int k = 0; k <= N; ++k) {
      if (k == 0) {
        flat.post[g] = t.x[0];
        if (flat.pre[g].size() == 0) flat.pre[g] = t.x[0];
      } else {
        flat.pre[g] = t.x[k];
        flat.post[g] = t.x[k];  // overwritten by the next phase's node 0
      }
      if (k < N) flat.u[g] = t.u[k];
      if (k < N) ++g;
    }
  }
  return flat;
}

}  // namespace

SolverTrajectory warm_start_shift(const BuiltProblem& prev,
                                  const SolverTrajectory& prev_traj,
                                  const BuiltProblem& next,
                                  const ReferenceTrajectory* reference) {
  const double dt = next.schedule.dt_w;
  const int shift = static_cast<int>(std::lround((next.t0 - prev.t0) / dt));
  FlatWb flat = flatten_wb(prev, prev_traj);

  SolverTrajectory out;
  out.phases.resize(next.problem.num_phases());

  int g = 0;  // grid index in the new problem
  for (size_t i = 0; i < next.info.size(); ++i) {
    const ocp::Phase& p = next.problem.phases[i];
    auto& t = out.phases[i];
    t.x.assign(p.N + 1, VectorXd::Zero(p.state_dim));
    t.u.assign(p.N, VectorXd::Zero(p.control_dim));
    t.defect.assign(p.N + 1, VectorXd::Zero(p.state_dim));
    t.shooting.assign(p.N + 1, 1);

    if (next.info[i].is_srb) {
      // states: time-interpolated from the previous SRB tail (the SRB state
      // is continuous across contact changes); controls: the GRF reference
      // at the new step times, which stays aligned with the contact flags
      const double dts = next.schedule.dt_s;
      const double t_new0 = next.info[i].t_start;
      const ocp::PhaseTrajectory* prev_srb = nullptr;
      double t_prev0 = 0;
      for (size_t j = 0; j < prev.info.size(); ++j)
        if (prev.info[j].is_srb) {
          prev_srb = &prev_traj.phases[j];
          t_prev0 = prev.info[j].t_start;
        }
      for (int k = 0; k <= p.N; ++k) {
        if (prev_srb && !prev_srb->x.empty()) {
          const double s = (t_new0 + k * dts - t_prev0) / dts;
          const int lo = std::clamp(static_cast<int>(std::floor(s)), 0,
                                    static_cast<int>(prev_srb->x.size()) - 1);
          const int hi = std::min<int>(lo + 1, static_cast<int>(prev_srb->x.size()) - 1);
          const double w = std::clamp(s - lo, 0.0, 1.0);
          t.x[k] = (1 - w) * prev_srb->x[lo] + w * prev_srb->x[hi];
        }
        if (k < p.N) {
          if (reference) {
            t.u[k] = reference->at(t_new0 + (k + 0.5) * dts).grf;
          } else if (prev_srb && !prev_srb->u.empty()) {
            const int su = std::clamp(
                static_cast<int>(std::lround((t_new0 + k * dts - t_prev0) / dts)), 0,
                static_cast<int>(prev_srb->u.size()) - 1);
            t.u[k] = prev_srb->u[su];
          }
        }
      }
      continue;
    }

    // did this phase exist in the previous window? judged by whether any of
    // its nodes fall beyond the previous grid
    bool has_appended = false;
    for (int k = 0; k <= p.N; ++k)
      if (g + k + shift > prev.wb_steps) has_appended = true;
    const bool entered_by_impact = (i > 0) && next.info[i - 1].impact_at_end;
    const bool appended_rollout = has_appended && entered_by_impact;

    for (int k = 0; k <= p.N; ++k) {
      const int src = g + k + shift;
      if (src <= prev.wb_steps) {
        t.x[k] = (k == 0) ? flat.post[src] : flat.pre[src];
        if (k < p.N) t.u[k] = flat.u[std::min(src, prev.wb_steps - 1)];
      } else {
        t.x[k] = flat.pre[prev.wb_steps];  // duplicate the last known state
        if (k < p.N) t.u[k] = flat.u[prev.wb_steps - 1];
        if (appended_rollout) t.shooting[k] = 0;
      }
    }
    g += p.N;
  }
  if (!out.phases.empty() && !out.phases[0].shooting.empty())
    out.phases[0].shooting[0] = 0;  // pinned to x0 by the solver
  return out;
}

}  // namespace cascade::mpc
